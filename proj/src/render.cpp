#include "esprit/render.hpp"

#include <fstream>

#include "esprit/physics.hpp"

namespace esprit {

namespace {

struct Rgb {
    uint8_t r, g, b;
};

Rgb color_rgb(Color c) {
    switch (c) {
        case Color::Red: return {235, 55, 45};
        case Color::Green: return {50, 160, 50};
        case Color::Blue: return {60, 90, 220};
        case Color::Purple: return {135, 60, 170};
        case Color::Gray: return {130, 130, 130};
        case Color::Black: return {30, 30, 30};
    }
    return {0, 0, 0};
}

bool fixture_contains(const WorldFixture& f, const Vec2& p) {
    if (f.is_circle) return (p - f.center).length2() <= f.radius * f.radius;
    const Vec2 local = rotate(p - f.center, -f.angle);
    return std::abs(local.x) <= f.hx && std::abs(local.y) <= f.hy;
}

}  // namespace

Image Image::blank(int w, int h) {
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<size_t>(w) * h * 3, 255);
    return img;
}

std::vector<uint8_t> Image::ppm_bytes() const {
    const std::string header =
        "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

void Image::write_ppm(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    const auto bytes = ppm_bytes();
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Image render_scene(const Scene& scene) {
    const int n = static_cast<int>(kWorldSize);
    Image img = Image::blank(n, n);
    for (const auto& body : scene.bodies) {
        if (body.is_boundary()) continue;
        const Rgb c = color_rgb(body.color);
        const auto fixtures = world_fixtures(body);
        // bounding box in pixel space to avoid scanning the whole frame
        const double br = bounding_radius(body);
        const int x0 = std::max(0, static_cast<int>(body.position.x - br) - 1);
        const int x1 = std::min(n - 1, static_cast<int>(body.position.x + br) + 1);
        const int y0 = std::max(0, static_cast<int>(body.position.y - br) - 1);
        const int y1 = std::min(n - 1, static_cast<int>(body.position.y + br) + 1);
        for (int py = y0; py <= y1; ++py) {
            for (int px = x0; px <= x1; ++px) {
                const Vec2 world{px + 0.5, py + 0.5};
                bool inside = false;
                for (const auto& f : fixtures)
                    if (fixture_contains(f, world)) inside = true;
                if (!inside) continue;
                // world y grows upward, image rows grow downward
                const size_t idx = (static_cast<size_t>(n - 1 - py) * n + px) * 3;
                img.pixels[idx] = c.r;
                img.pixels[idx + 1] = c.g;
                img.pixels[idx + 2] = c.b;
            }
        }
    }
    return img;
}

Image concat_strip(const std::vector<Image>& panels) {
    if (panels.empty()) return Image::blank(1, 1);
    const int h = panels.front().height;
    const int sep = 2;
    int w = 0;
    for (const auto& p : panels) w += p.width;
    w += sep * (static_cast<int>(panels.size()) - 1);
    Image out = Image::blank(w, h);
    int xoff = 0;
    for (size_t i = 0; i < panels.size(); ++i) {
        const Image& p = panels[i];
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x) {
                const size_t src = (static_cast<size_t>(y) * p.width + x) * 3;
                const size_t dst = (static_cast<size_t>(y) * w + xoff + x) * 3;
                out.pixels[dst] = p.pixels[src];
                out.pixels[dst + 1] = p.pixels[src + 1];
                out.pixels[dst + 2] = p.pixels[src + 2];
            }
        xoff += p.width + sep;
    }
    return out;
}

}  // namespace esprit
