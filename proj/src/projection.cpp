#include "ctopt/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ctopt/errors.hpp"
#include "ctopt/ray_trace.hpp"
#include "ctopt/rng.hpp"

namespace ctopt {

float ProjectionImage::roi_min() const {
    float best = std::numeric_limits<float>::max();
    for (int r = roi.row_begin; r < roi.row_end; ++r)
        for (int c = roi.col_begin; c < roi.col_end; ++c)
            best = std::min(best, at(r, c));
    return best;
}

ProjectionImage forward_project(const Volume& phantom, const Pose& pose, const Voi& voi,
                                int id) {
    pose.validate();
    if (phantom.size() == 0) {
        throw std::invalid_argument("forward_project: empty phantom");
    }
    ProjectionImage proj;
    proj.rows = pose.detector_rows;
    proj.cols = pose.detector_cols;
    proj.pixels.assign(static_cast<std::size_t>(proj.rows) * proj.cols, 1.0f);
    proj.pose = pose;
    proj.id = id;
    proj.roi = voi_to_roi(pose, voi);

    for (int r = 0; r < proj.rows; ++r) {
        for (int c = 0; c < proj.cols; ++c) {
            const Vec3 pixel = pose.pixel_position(r, c);
            const double attenuation = line_integral(phantom, pose.source_position, pixel);
            proj.at(r, c) = static_cast<float>(std::exp(-attenuation));
        }
    }
    return proj;
}

ProjectionImage apply_noise(const ProjectionImage& proj, long photons_per_ray,
                            std::uint64_t seed) {
    if (photons_per_ray < 1) {
        throw std::invalid_argument("apply_noise: photons_per_ray must be >= 1");
    }
    ProjectionImage noisy = proj;
    const double photons = static_cast<double>(photons_per_ray);
    for (std::size_t i = 0; i < noisy.pixels.size(); ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(proj.id), i);
        const double mean = photons * noisy.pixels[i];
        noisy.pixels[i] = static_cast<float>(sample_poisson(mean, rng) / photons);
    }
    return noisy;
}

const ProjectionImage* ProjectionStack::find(int id) const {
    for (const ProjectionImage& p : projections) {
        if (p.id == id) {
            return &p;
        }
    }
    return nullptr;
}

const ProjectionImage& ProjectionStack::by_id(int id) const {
    const ProjectionImage* p = find(id);
    if (p == nullptr) {
        throw std::invalid_argument("no projection with id " + std::to_string(id));
    }
    return *p;
}

namespace {

nlohmann::json pose_to_json(const Pose& pose) {
    return {{"source", {pose.source_position.x, pose.source_position.y, pose.source_position.z}},
            {"detector_center",
             {pose.detector_center.x, pose.detector_center.y, pose.detector_center.z}},
            {"u", {pose.detector_u_axis.x, pose.detector_u_axis.y, pose.detector_u_axis.z}},
            {"v", {pose.detector_v_axis.x, pose.detector_v_axis.y, pose.detector_v_axis.z}},
            {"pitch", pose.pixel_pitch},
            {"rows", pose.detector_rows},
            {"cols", pose.detector_cols}};
}

Vec3 vec_from_json(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

Pose pose_from_json(const nlohmann::json& j) {
    Pose pose;
    pose.source_position = vec_from_json(j.at("source"));
    pose.detector_center = vec_from_json(j.at("detector_center"));
    pose.detector_u_axis = vec_from_json(j.at("u"));
    pose.detector_v_axis = vec_from_json(j.at("v"));
    pose.pixel_pitch = j.at("pitch").get<double>();
    pose.detector_rows = j.at("rows").get<int>();
    pose.detector_cols = j.at("cols").get<int>();
    return pose;
}

std::string raw_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "proj_%06d.raw", id);
    return buf;
}

} // namespace

void write_stack(const std::filesystem::path& dir, const ProjectionStack& stack) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["rows"] = stack.detector.rows;
    manifest["cols"] = stack.detector.cols;
    manifest["pitch"] = stack.detector.pixel_pitch;
    manifest["dtype"] = "float32-le";
    manifest["projections"] = nlohmann::json::array();

    for (const ProjectionImage& proj : stack.projections) {
        if (proj.rows != stack.detector.rows || proj.cols != stack.detector.cols) {
            throw FormatError("write_stack: projection " + std::to_string(proj.id) +
                              " detector size mismatch");
        }
        const std::string file = raw_name(proj.id);
        manifest["projections"].push_back(
            {{"id", proj.id},
             {"file", file},
             {"pose", pose_to_json(proj.pose)},
             {"roi",
              {{"row_begin", proj.roi.row_begin}, {"row_end", proj.roi.row_end},
               {"col_begin", proj.roi.col_begin}, {"col_end", proj.roi.col_end},
               {"clamped", proj.roi.clamped}}}});
        std::ofstream out(dir / file, std::ios::binary);
        if (!out) {
            throw FormatError("cannot write projection file: " + (dir / file).string());
        }
        out.write(reinterpret_cast<const char*>(proj.pixels.data()),
                  static_cast<std::streamsize>(proj.pixels.size() * sizeof(float)));
    }

    std::ofstream mout(dir / "manifest.json");
    if (!mout) {
        throw FormatError("cannot write stack manifest in " + dir.string());
    }
    mout << manifest.dump(2) << "\n";
}

ProjectionStack read_stack(const std::filesystem::path& dir) {
    std::ifstream min(dir / "manifest.json");
    if (!min) {
        throw FormatError("missing stack manifest: " + (dir / "manifest.json").string());
    }
    nlohmann::json manifest;
    try {
        min >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed stack manifest: " + std::string(e.what()));
    }

    ProjectionStack stack;
    try {
        stack.detector.rows = manifest.at("rows").get<int>();
        stack.detector.cols = manifest.at("cols").get<int>();
        stack.detector.pixel_pitch = manifest.at("pitch").get<double>();

        for (const nlohmann::json& entry : manifest.at("projections")) {
            ProjectionImage proj;
            proj.rows = stack.detector.rows;
            proj.cols = stack.detector.cols;
            proj.id = entry.at("id").get<int>();
            proj.pose = pose_from_json(entry.at("pose"));
            const nlohmann::json& roi = entry.at("roi");
            proj.roi.row_begin = roi.at("row_begin").get<int>();
            proj.roi.row_end = roi.at("row_end").get<int>();
            proj.roi.col_begin = roi.at("col_begin").get<int>();
            proj.roi.col_end = roi.at("col_end").get<int>();
            proj.roi.clamped = roi.at("clamped").get<bool>();

            const std::filesystem::path file = dir / entry.at("file").get<std::string>();
            const std::size_t expected = static_cast<std::size_t>(proj.rows) * proj.cols;
            std::error_code ec;
            const auto bytes = std::filesystem::file_size(file, ec);
            if (ec) {
                throw FormatError("missing projection file: " + file.string());
            }
            if (bytes != expected * sizeof(float)) {
                throw FormatError("projection file size mismatch: " + file.string());
            }
            proj.pixels.resize(expected);
            std::ifstream in(file, std::ios::binary);
            in.read(reinterpret_cast<char*>(proj.pixels.data()),
                    static_cast<std::streamsize>(expected * sizeof(float)));
            if (static_cast<std::size_t>(in.gcount()) != expected * sizeof(float)) {
                throw FormatError("projection file truncated: " + file.string());
            }
            stack.projections.push_back(std::move(proj));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed stack manifest: " + std::string(e.what()));
    }
    return stack;
}

} // namespace ctopt
