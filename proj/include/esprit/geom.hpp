#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

namespace esprit {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    // scalar z-component of the 2D cross product
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double length() const { return std::hypot(x, y); }
    double length2() const { return x * x + y * y; }

    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// rotate by angle (radians) about the origin
inline Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// cross of scalar (z) with vector, gives the tangential velocity of a lever arm
inline Vec2 cross(double w, const Vec2& r) { return {-w * r.y, w * r.x}; }

struct CircleShape {
    double radius = 1.0;
};

struct BarShape {
    double length = 1.0;
    double width = 1.0;
    double angle_rad = 0.0;  // rest orientation baked into the shape
};

struct JarShape {
    double base_length = 1.0;
    double side_length = 1.0;
    double width = 1.0;
    double angle_rad = 0.0;
};

// Boundary geometry is derived from the body position relative to the world
// box; the shape itself carries no parameters.
struct BoundaryShape {};

using ShapeSpec = std::variant<CircleShape, BarShape, JarShape, BoundaryShape>;

enum class ShapeClass { Boundary = 0, Bar = 1, Jar = 2, Circle = 3 };

inline ShapeClass shape_class(const ShapeSpec& s) {
    if (std::holds_alternative<CircleShape>(s)) return ShapeClass::Circle;
    if (std::holds_alternative<BarShape>(s)) return ShapeClass::Bar;
    if (std::holds_alternative<JarShape>(s)) return ShapeClass::Jar;
    return ShapeClass::Boundary;
}

inline std::string shape_class_name(ShapeClass c) {
    switch (c) {
        case ShapeClass::Boundary: return "boundary";
        case ShapeClass::Bar: return "bar";
        case ShapeClass::Jar: return "jar";
        case ShapeClass::Circle: return "circle";
    }
    return "?";
}

enum class Color { Red, Green, Blue, Purple, Gray, Black };

inline bool color_is_dynamic(Color c) {
    switch (c) {
        case Color::Red:
        case Color::Green:
        case Color::Blue:
        case Color::Gray:
            return true;
        case Color::Purple:
        case Color::Black:
            return false;
    }
    return false;
}

inline std::string color_name(Color c) {
    switch (c) {
        case Color::Red: return "red";
        case Color::Green: return "green";
        case Color::Blue: return "blue";
        case Color::Purple: return "purple";
        case Color::Gray: return "gray";
        case Color::Black: return "black";
    }
    return "?";
}

inline Color color_from_name(const std::string& s) {
    if (s == "red") return Color::Red;
    if (s == "green") return Color::Green;
    if (s == "blue") return Color::Blue;
    if (s == "purple") return Color::Purple;
    if (s == "gray") return Color::Gray;
    if (s == "black") return Color::Black;
    throw std::invalid_argument("unknown color: " + s);
}

}  // namespace esprit
