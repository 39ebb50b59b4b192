#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ctopt/errors.hpp"
#include "ctopt/evaluation.hpp"
#include "ctopt/rng.hpp"

using namespace ctopt;

namespace {

Volume checkerboard(int n, int period) {
    Volume vol = Volume::centered_cube(n, 1.0);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                vol.at(x, y, z) = ((x / period + y / period + z / period) % 2) ? 1.0f : 0.0f;
    return vol;
}

Volume noisy_copy(const Volume& vol, double amplitude, std::uint64_t seed) {
    Volume out = vol;
    CounterRng rng(seed);
    for (float& v : out.values) {
        v = static_cast<float>(v + amplitude * (rng.next_double() - 0.5));
    }
    return out;
}

} // namespace

TEST_CASE("ssim: identity is exactly one") {
    const Volume vol = checkerboard(24, 4);
    CHECK(ssim(vol, vol) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim: symmetric when both volumes share the range") {
    const Volume a = checkerboard(20, 4);
    const Volume b = checkerboard(20, 5); // same {0,1} range, different structure
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("ssim: anti-correlated binary volume scores far below zero-similarity") {
    const Volume a = checkerboard(32, 4);
    Volume inverted = a;
    for (float& v : inverted.values) {
        v = 1.0f - v;
    }
    const double value = ssim(inverted, a);
    CHECK(value < 0.1);
    CHECK(value == doctest::Approx(-0.9943).epsilon(1e-3)); // pinned
}

TEST_CASE("ssim: dimension mismatch rejected") {
    const Volume a = checkerboard(16, 4);
    const Volume b = checkerboard(20, 4);
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
}

TEST_CASE("psnr: analytic value and the identical flag") {
    Volume reference = Volume::centered_cube(16, 1.0);
    for (std::size_t i = 0; i < reference.values.size(); ++i) {
        reference.values[i] = static_cast<float>(i % 2); // range 1
    }
    Volume offset = reference;
    for (float& v : offset.values) {
        v += 0.1f;
    }
    const PsnrResult result = psnr(offset, reference);
    CHECK_FALSE(result.identical);
    CHECK(result.db == doctest::Approx(20.0).epsilon(1e-4)); // 10 log10(1/0.01)

    const PsnrResult same = psnr(reference, reference);
    CHECK(same.identical);
}

TEST_CASE("psnr: strictly decreasing under growing noise") {
    const Volume reference = checkerboard(24, 4);
    double previous = std::numeric_limits<double>::infinity();
    for (double amplitude : {0.01, 0.02, 0.04, 0.08}) {
        const PsnrResult r = psnr(noisy_copy(reference, amplitude, 5), reference);
        CHECK(r.db < previous);
        previous = r.db;
    }
}

TEST_CASE("volume CNR: substitution anchor and degenerate background") {
    Volume vol = Volume::centered_cube(12, 1.0);
    // ROI [0,2)^3 holding max 0.9 / min 0.4
    const float roi_values[8] = {0.9f, 0.4f, 0.6f, 0.5f, 0.45f, 0.55f, 0.7f, 0.65f};
    int next = 0;
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                vol.at(x, y, z) = roi_values[next++];
    // background plane with sigma 0.05
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
            vol.at(x, y, 11) = ((x + y) % 2 == 0) ? 0.45f : 0.55f;

    const VoxelBox roi{0, 2, 0, 2, 0, 2};
    const VoxelBox background{0, 12, 0, 12, 11, 12};
    CHECK(volume_cnr(vol, roi, background) == doctest::Approx(10.0).epsilon(1e-4));

    // constant ROI -> 0
    Volume flat = vol;
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                flat.at(x, y, z) = 0.5f;
    CHECK(volume_cnr(flat, roi, background) == doctest::Approx(0.0));

    // constant background -> degenerate
    const VoxelBox dead{0, 2, 0, 2, 5, 7};
    CHECK_THROWS_AS(volume_cnr(vol, roi, dead), DegenerateBackgroundError);
    CHECK_THROWS_AS(volume_cnr(vol, VoxelBox{}, background), std::invalid_argument);
}

TEST_CASE("compare: identity row and report shape") {
    const Volume reference = checkerboard(20, 4);
    const Volume other = noisy_copy(reference, 0.05, 3);
    const VoxelBox roi{4, 10, 4, 10, 4, 10};
    const VoxelBox background{12, 18, 12, 18, 12, 18};

    const QualityReport report =
        compare(reference, {{"self", &reference}, {"noisy", &other}}, roi, background,
                {{"self", 100.0}, {"noisy", 42.0}});
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].name == "self");
    CHECK(report.rows[0].ssim_value == doctest::Approx(1.0));
    CHECK(report.rows[0].psnr_value.identical);
    CHECK(report.rows[0].coverage_percent == 100.0);
    CHECK(report.rows[1].ssim_value < 1.0);
    CHECK_FALSE(report.rows[1].psnr_value.identical);
    CHECK(report.rows[1].coverage_percent == 42.0);
}

TEST_CASE("report files: csv columns and json structure") {
    const Volume reference = checkerboard(16, 4);
    const Volume other = noisy_copy(reference, 0.02, 9);
    const VoxelBox roi{2, 8, 2, 8, 2, 8};
    const VoxelBox background{10, 14, 10, 14, 10, 14};
    QualityReport report = compare(reference, {{"reference", &reference}, {"noisy", &other}},
                                   roi, background, {});
    report.config_echo = {{"k", 24}};

    const auto dir = std::filesystem::temp_directory_path() / "ctopt_report_test";
    std::filesystem::create_directories(dir);
    report.write_csv(dir / "report.csv");
    report.write_json(dir / "report.json");

    std::ifstream csv(dir / "report.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line.rfind("# config", 0) == 0);
    std::getline(csv, line);
    CHECK(line == "Approach,SSIM,PSNR_dB,CNR,Coverage_percent");
    std::getline(csv, line);
    CHECK(line.find("reference") == 0);
    CHECK(line.find("identical") != std::string::npos);

    std::ifstream jf(dir / "report.json");
    nlohmann::json doc;
    jf >> doc;
    CHECK(doc.at("rows").size() == 2);
    CHECK(doc.at("config").at("k") == 24);
    CHECK(doc.at("rows").at(0).at("psnr_db") == "identical");
    std::filesystem::remove_all(dir);
}
