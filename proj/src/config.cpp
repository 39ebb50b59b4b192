#include "ctopt/config.hpp"

#include <fstream>

#include "ctopt/errors.hpp"
#include "ctopt/rng.hpp"

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
            throw FormatError(std::string("unknown config key '") + it.key() + "' in " + where);
        }
    }
}

Vec3 vec_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw FormatError("expected a 3-element array in config");
    }
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

VoxelBox box_from(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 6) {
        throw FormatError("voxel box must be [x0,x1,y0,y1,z0,z1]");
    }
    return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(),
            j.at(3).get<int>(), j.at(4).get<int>(), j.at(5).get<int>()};
}

nlohmann::json box_to(const VoxelBox& b) {
    return nlohmann::json::array({b.x0, b.x1, b.y0, b.y1, b.z0, b.z1});
}

} // namespace

std::uint64_t RunConfig::noise_seed() const { return mix_keys(seed, 0x6e6f697365ull); }
std::uint64_t RunConfig::selection_seed() const { return mix_keys(seed, 0x73656c656374ull); }
std::uint64_t RunConfig::art_seed() const { return mix_keys(seed, 0x726563ull); }

VoxelBox RunConfig::resolved_cnr_roi() const {
    if (!cnr_roi.empty()) {
        return cnr_roi;
    }
    const int center = phantom.dims / 2;
    const int half_x = std::max(1, static_cast<int>(voi.half_extent.x / phantom.voxel_size_mm));
    const int half_y = std::max(1, static_cast<int>(voi.half_extent.y / phantom.voxel_size_mm));
    const int half_z = std::max(1, static_cast<int>(voi.half_extent.z / phantom.voxel_size_mm));
    return {center - half_x, center + half_x, center - half_y, center + half_y,
            center - half_z, center + half_z};
}

VoxelBox RunConfig::resolved_cnr_background() const {
    if (!cnr_background.empty()) {
        return cnr_background;
    }
    const int margin = std::max(1, phantom.dims / 32);
    const int side = std::max(2, phantom.dims / 8);
    return {margin, margin + side, margin, margin + side, margin, margin + side};
}

void RunConfig::validate() const {
    if (n_candidates < 1) {
        throw std::invalid_argument("config: n_candidates must be >= 1");
    }
    if (source_radius_mm <= 0.0 || sdd_mm <= source_radius_mm) {
        throw std::invalid_argument("config: need 0 < source_radius_mm < sdd_mm");
    }
    if (alpha < 0.0 || alpha >= 1.0) {
        throw std::invalid_argument("config: alpha must lie in [0, 1)");
    }
    if (delta_gamma_deg <= 0.0 || delta_gamma_deg >= 90.0) {
        throw std::invalid_argument("config: delta_gamma_deg must lie in (0, 90)");
    }
    if (m_hemisphere < 1) {
        throw std::invalid_argument("config: m_hemisphere must be >= 1");
    }
    if (k < 1 || k > n_candidates) {
        throw std::invalid_argument("config: k must lie in [1, n_candidates]");
    }
    if (photons_per_ray < 0) {
        throw std::invalid_argument("config: photons_per_ray must be >= 0");
    }
    voi.validate();
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    check_keys(j,
               {"phantom", "trajectory", "detector", "voi", "alpha", "delta_gamma_deg",
                "m_hemisphere", "k", "selector", "weights", "noise", "circular", "art",
                "cnr_boxes", "seed", "threads", "out_dir"},
               "config");
    RunConfig cfg;
    if (j.contains("phantom")) {
        cfg.phantom = PhantomSpec::from_json(j.at("phantom"));
    }
    if (j.contains("trajectory")) {
        const nlohmann::json& t = j.at("trajectory");
        check_keys(t, {"n_candidates", "source_radius_mm", "sdd_mm"}, "trajectory");
        cfg.n_candidates = t.value("n_candidates", cfg.n_candidates);
        cfg.source_radius_mm = t.value("source_radius_mm", cfg.source_radius_mm);
        cfg.sdd_mm = t.value("sdd_mm", cfg.sdd_mm);
    }
    if (j.contains("detector")) {
        const nlohmann::json& d = j.at("detector");
        check_keys(d, {"rows", "cols", "pixel_pitch_mm"}, "detector");
        cfg.detector.rows = d.value("rows", cfg.detector.rows);
        cfg.detector.cols = d.value("cols", cfg.detector.cols);
        cfg.detector.pixel_pitch = d.value("pixel_pitch_mm", cfg.detector.pixel_pitch);
    }
    if (j.contains("voi")) {
        const nlohmann::json& v = j.at("voi");
        check_keys(v, {"center_mm", "half_extent_mm"}, "voi");
        if (v.contains("center_mm")) {
            cfg.voi.center = vec_from(v.at("center_mm"));
        }
        if (v.contains("half_extent_mm")) {
            cfg.voi.half_extent = vec_from(v.at("half_extent_mm"));
        }
    }
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.delta_gamma_deg = j.value("delta_gamma_deg", cfg.delta_gamma_deg);
    cfg.m_hemisphere = j.value("m_hemisphere", cfg.m_hemisphere);
    cfg.k = j.value("k", cfg.k);
    if (j.contains("selector")) {
        const nlohmann::json& s = j.at("selector");
        check_keys(s,
                   {"hidden_size", "num_layers", "max_loops", "learning_rate", "beta1",
                    "beta2", "epsilon", "weight_decay"},
                   "selector");
        cfg.gru.hidden_size = s.value("hidden_size", cfg.gru.hidden_size);
        cfg.gru.num_layers = s.value("num_layers", cfg.gru.num_layers);
        cfg.gru.max_loops = s.value("max_loops", cfg.gru.max_loops);
        cfg.gru.adamw.learning_rate = s.value("learning_rate", cfg.gru.adamw.learning_rate);
        cfg.gru.adamw.beta1 = s.value("beta1", cfg.gru.adamw.beta1);
        cfg.gru.adamw.beta2 = s.value("beta2", cfg.gru.adamw.beta2);
        cfg.gru.adamw.epsilon = s.value("epsilon", cfg.gru.adamw.epsilon);
        cfg.gru.adamw.weight_decay = s.value("weight_decay", cfg.gru.adamw.weight_decay);
    }
    if (j.contains("weights")) {
        const nlohmann::json& w = j.at("weights");
        check_keys(w, {"pixel_intensity", "cnr", "completeness"}, "weights");
        cfg.weights.pixel_intensity = w.value("pixel_intensity", cfg.weights.pixel_intensity);
        cfg.weights.cnr = w.value("cnr", cfg.weights.cnr);
        cfg.weights.completeness = w.value("completeness", cfg.weights.completeness);
    }
    if (j.contains("noise")) {
        const nlohmann::json& n = j.at("noise");
        check_keys(n, {"photons_per_ray"}, "noise");
        cfg.photons_per_ray = n.value("photons_per_ray", cfg.photons_per_ray);
    }
    if (j.contains("circular")) {
        const nlohmann::json& c = j.at("circular");
        check_keys(c, {"plane_normal"}, "circular");
        if (c.contains("plane_normal")) {
            cfg.circular_normal = vec_from(c.at("plane_normal"));
        }
    }
    if (j.contains("art")) {
        const nlohmann::json& a = j.at("art");
        check_keys(a, {"sweeps", "relaxation"}, "art");
        cfg.art.sweeps = a.value("sweeps", cfg.art.sweeps);
        cfg.art.relaxation = a.value("relaxation", cfg.art.relaxation);
    }
    if (j.contains("cnr_boxes")) {
        const nlohmann::json& b = j.at("cnr_boxes");
        check_keys(b, {"roi", "background"}, "cnr_boxes");
        if (b.contains("roi")) {
            cfg.cnr_roi = box_from(b.at("roi"));
        }
        if (b.contains("background")) {
            cfg.cnr_background = box_from(b.at("background"));
        }
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw FormatError("cannot open config file: " + file.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed config JSON in " + file.string() + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["phantom"] = phantom.to_json();
    j["trajectory"] = {{"n_candidates", n_candidates},
                       {"source_radius_mm", source_radius_mm},
                       {"sdd_mm", sdd_mm}};
    j["detector"] = {{"rows", detector.rows},
                     {"cols", detector.cols},
                     {"pixel_pitch_mm", detector.pixel_pitch}};
    j["voi"] = {{"center_mm", {voi.center.x, voi.center.y, voi.center.z}},
                {"half_extent_mm", {voi.half_extent.x, voi.half_extent.y, voi.half_extent.z}}};
    j["alpha"] = alpha;
    j["delta_gamma_deg"] = delta_gamma_deg;
    j["m_hemisphere"] = m_hemisphere;
    j["k"] = k;
    j["selector"] = {{"hidden_size", gru.hidden_size},
                     {"num_layers", gru.num_layers},
                     {"max_loops", gru.max_loops},
                     {"learning_rate", gru.adamw.learning_rate},
                     {"beta1", gru.adamw.beta1},
                     {"beta2", gru.adamw.beta2},
                     {"epsilon", gru.adamw.epsilon},
                     {"weight_decay", gru.adamw.weight_decay}};
    j["weights"] = {{"pixel_intensity", weights.pixel_intensity},
                    {"cnr", weights.cnr},
                    {"completeness", weights.completeness}};
    j["noise"] = {{"photons_per_ray", photons_per_ray}};
    j["circular"] = {{"plane_normal", {circular_normal.x, circular_normal.y, circular_normal.z}}};
    j["art"] = {{"sweeps", art.sweeps}, {"relaxation", art.relaxation}};
    j["cnr_boxes"] = {{"roi", box_to(resolved_cnr_roi())},
                      {"background", box_to(resolved_cnr_background())}};
    j["seed"] = seed;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    return j;
}

} // namespace ctopt
