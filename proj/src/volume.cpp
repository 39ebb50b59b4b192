#include "ctopt/volume.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ctopt/errors.hpp"

namespace ctopt {

Volume Volume::centered_cube(int n, double voxel_size, const Vec3& center) {
    const double half = 0.5 * n * voxel_size;
    return Volume(n, n, n, voxel_size, center - Vec3{half, half, half});
}

namespace {

std::filesystem::path header_path(const std::filesystem::path& raw_file) {
    std::filesystem::path p = raw_file;
    p.replace_extension(".json");
    return p;
}

} // namespace

void Volume::save(const std::filesystem::path& raw_file) const {
    nlohmann::json header;
    header["dims"] = {nx, ny, nz};
    header["voxel_size_mm"] = voxel_size;
    header["origin_mm"] = {origin.x, origin.y, origin.z};
    header["dtype"] = "float32-le";

    std::ofstream hout(header_path(raw_file));
    if (!hout) {
        throw FormatError("cannot write volume header: " + header_path(raw_file).string());
    }
    hout << header.dump(2) << "\n";

    std::ofstream out(raw_file, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write volume file: " + raw_file.string());
    }
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
}

Volume Volume::load(const std::filesystem::path& raw_file) {
    std::ifstream hin(header_path(raw_file));
    if (!hin) {
        throw FormatError("missing volume header: " + header_path(raw_file).string());
    }
    nlohmann::json header;
    try {
        hin >> header;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed volume header: " + std::string(e.what()));
    }
    const auto dims = header.at("dims");
    Volume vol(dims.at(0).get<int>(), dims.at(1).get<int>(), dims.at(2).get<int>(),
               header.at("voxel_size_mm").get<double>(),
               Vec3{header.at("origin_mm").at(0).get<double>(),
                    header.at("origin_mm").at(1).get<double>(),
                    header.at("origin_mm").at(2).get<double>()});

    std::ifstream in(raw_file, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open volume file: " + raw_file.string());
    }
    in.read(reinterpret_cast<char*>(vol.values.data()),
            static_cast<std::streamsize>(vol.values.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != vol.values.size() * sizeof(float)) {
        throw FormatError("volume file truncated: " + raw_file.string());
    }
    return vol;
}

namespace {

void write_pgm(const std::filesystem::path& file, int width, int height,
               const std::vector<unsigned char>& data) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write slice image: " + file.string());
    }
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
}

} // namespace

void Volume::write_center_slices(const std::filesystem::path& prefix) const {
    const float peak = values.empty() ? 1.0f : *std::max_element(values.begin(), values.end());
    const float scale = peak > 0.0f ? 255.0f / peak : 0.0f;
    auto to_byte = [&](float v) {
        return static_cast<unsigned char>(std::clamp(v * scale, 0.0f, 255.0f));
    };

    std::vector<unsigned char> xy(static_cast<std::size_t>(nx) * ny);
    const int zc = nz / 2;
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix)
            xy[static_cast<std::size_t>(iy) * nx + ix] = to_byte(at(ix, iy, zc));
    write_pgm(prefix.string() + "_xy.pgm", nx, ny, xy);

    std::vector<unsigned char> xz(static_cast<std::size_t>(nx) * nz);
    const int yc = ny / 2;
    for (int iz = 0; iz < nz; ++iz)
        for (int ix = 0; ix < nx; ++ix)
            xz[static_cast<std::size_t>(iz) * nx + ix] = to_byte(at(ix, yc, iz));
    write_pgm(prefix.string() + "_xz.pgm", nx, nz, xz);

    std::vector<unsigned char> yz(static_cast<std::size_t>(ny) * nz);
    const int xc = nx / 2;
    for (int iz = 0; iz < nz; ++iz)
        for (int iy = 0; iy < ny; ++iy)
            yz[static_cast<std::size_t>(iz) * ny + iy] = to_byte(at(xc, iy, iz));
    write_pgm(prefix.string() + "_yz.pgm", ny, nz, yz);
}

} // namespace ctopt
