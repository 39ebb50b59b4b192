#include "ctopt/phantom.hpp"

#include <cmath>
#include <stdexcept>

#include "ctopt/errors.hpp"

namespace ctopt {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw FormatError(std::string("unknown key '") + it.key() + "' in " + where);
        }
    }
}

void paint_box(Volume& vol, const PhantomSpec::Box& box) {
    const int x0 = std::max(box.x0, 0), x1 = std::min(box.x1, vol.nx);
    const int y0 = std::max(box.y0, 0), y1 = std::min(box.y1, vol.ny);
    const int z0 = std::max(box.z0, 0), z1 = std::min(box.z1, vol.nz);
    for (int iz = z0; iz < z1; ++iz)
        for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix)
                vol.at(ix, iy, iz) = static_cast<float>(box.mu);
}

void carve_bore(Volume& vol, const PhantomSpec::Bore& bore) {
    const double r2 = bore.radius * bore.radius;
    for (int iz = 0; iz < vol.nz; ++iz) {
        for (int iy = 0; iy < vol.ny; ++iy) {
            for (int ix = 0; ix < vol.nx; ++ix) {
                double a, b;
                switch (bore.axis) {
                case 'x': a = iy + 0.5; b = iz + 0.5; break;
                case 'y': a = ix + 0.5; b = iz + 0.5; break;
                case 'z': a = ix + 0.5; b = iy + 0.5; break;
                default: throw std::invalid_argument("bore axis must be x, y or z");
                }
                const double da = a - bore.center_a;
                const double db = b - bore.center_b;
                if (da * da + db * db < r2) {
                    vol.at(ix, iy, iz) = 0.0f;
                }
            }
        }
    }
}

/// Tall pillar with dense inclusions at many heights and horizontal bores.
/// Chords along the pillar axis run several times longer than transverse
/// ones, so near-axial views drop out of the alpha filter while the
/// surviving mid-latitude views still measure all the internal structure.
void expand_test_specimen(PhantomSpec& spec) {
    const int d = spec.dims;
    auto at = [d](int v64) { return (v64 * d) / 64; };
    spec.boxes.push_back({at(22), at(42), at(22), at(42), at(4), at(60), 0.32});

    // 4^3 dense inclusions scattered through the pillar height
    const int centers[10][3] = {{26, 26, 10}, {37, 30, 16}, {30, 38, 24}, {26, 30, 32},
                                {36, 36, 38}, {28, 26, 46}, {34, 32, 54}, {30, 34, 8},
                                {37, 26, 28}, {26, 37, 50}};
    for (const auto& c : centers) {
        spec.boxes.push_back({at(c[0] - 2), at(c[0] + 2), at(c[1] - 2), at(c[1] + 2),
                              at(c[2] - 2), at(c[2] + 2), 0.62});
    }

    const double s = d / 64.0;
    spec.bores.push_back({'x', 32.0 * s, 20.0 * s, 2.0 * s});
    spec.bores.push_back({'y', 28.0 * s, 34.0 * s, 2.0 * s});
    spec.bores.push_back({'x', 36.0 * s, 44.0 * s, 2.0 * s});
    spec.bores.push_back({'y', 34.0 * s, 12.0 * s, 2.0 * s});
}

} // namespace

PhantomSpec PhantomSpec::from_json(const nlohmann::json& j) {
    check_keys(j, {"preset", "dims", "voxel_size_mm", "mu", "side_voxels", "boxes", "bores"},
               "phantom");
    PhantomSpec spec;
    spec.preset = j.value("preset", spec.preset);
    spec.dims = j.value("dims", spec.dims);
    spec.voxel_size_mm = j.value("voxel_size_mm", spec.voxel_size_mm);
    spec.mu = j.value("mu", spec.mu);
    spec.side_voxels = j.value("side_voxels", spec.side_voxels);
    if (j.contains("boxes")) {
        for (const nlohmann::json& b : j.at("boxes")) {
            check_keys(b, {"x0", "x1", "y0", "y1", "z0", "z1", "mu"}, "phantom box");
            spec.boxes.push_back({b.at("x0").get<int>(), b.at("x1").get<int>(),
                                  b.at("y0").get<int>(), b.at("y1").get<int>(),
                                  b.at("z0").get<int>(), b.at("z1").get<int>(),
                                  b.at("mu").get<double>()});
        }
    }
    if (j.contains("bores")) {
        for (const nlohmann::json& b : j.at("bores")) {
            check_keys(b, {"axis", "center_a", "center_b", "radius"}, "phantom bore");
            spec.bores.push_back({b.at("axis").get<std::string>().at(0),
                                  b.at("center_a").get<double>(),
                                  b.at("center_b").get<double>(),
                                  b.at("radius").get<double>()});
        }
    }
    return spec;
}

nlohmann::json PhantomSpec::to_json() const {
    nlohmann::json j;
    j["preset"] = preset;
    j["dims"] = dims;
    j["voxel_size_mm"] = voxel_size_mm;
    j["mu"] = mu;
    j["side_voxels"] = side_voxels;
    if (!boxes.empty()) {
        j["boxes"] = nlohmann::json::array();
        for (const Box& b : boxes) {
            j["boxes"].push_back({{"x0", b.x0}, {"x1", b.x1}, {"y0", b.y0}, {"y1", b.y1},
                                  {"z0", b.z0}, {"z1", b.z1}, {"mu", b.mu}});
        }
    }
    if (!bores.empty()) {
        j["bores"] = nlohmann::json::array();
        for (const Bore& b : bores) {
            j["bores"].push_back({{"axis", std::string(1, b.axis)}, {"center_a", b.center_a},
                                  {"center_b", b.center_b}, {"radius", b.radius}});
        }
    }
    return j;
}

Volume build_phantom(const PhantomSpec& spec) {
    if (spec.dims <= 0 || spec.voxel_size_mm <= 0.0) {
        throw std::invalid_argument("phantom dims and voxel size must be positive");
    }
    PhantomSpec resolved = spec;
    if (spec.preset == "uniform_cube") {
        const int side = std::min(spec.side_voxels, spec.dims);
        const int c0 = (spec.dims - side) / 2;
        resolved.boxes.insert(resolved.boxes.begin(),
                              {c0, c0 + side, c0, c0 + side, c0, c0 + side, spec.mu});
    } else if (spec.preset == "test_specimen") {
        expand_test_specimen(resolved);
    } else if (spec.preset != "custom") {
        throw std::invalid_argument("unknown phantom preset: " + spec.preset);
    }

    Volume vol = Volume::centered_cube(spec.dims, spec.voxel_size_mm);
    for (const PhantomSpec::Box& box : resolved.boxes) {
        if (box.mu < 0.0) {
            throw std::invalid_argument("phantom attenuation must be nonnegative");
        }
        paint_box(vol, box);
    }
    for (const PhantomSpec::Bore& bore : resolved.bores) {
        carve_bore(vol, bore);
    }
    return vol;
}

} // namespace ctopt
