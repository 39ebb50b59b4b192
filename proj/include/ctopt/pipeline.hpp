#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctopt/config.hpp"

namespace ctopt {

/// Selection methods a pipeline run may produce.
enum class SelectMethod { gru, greedy, both };
SelectMethod select_method_from_string(const std::string& s);

/// Stage entry points. Each stage reads only on-disk artifacts of earlier
/// stages (plus the config), writes its own artifacts and a stage manifest,
/// and can therefore be re-run in isolation.
void stage_simulate(const RunConfig& cfg, const std::filesystem::path& out);
void stage_completeness(const RunConfig& cfg, const std::filesystem::path& out);
void stage_metrics(const RunConfig& cfg, const std::filesystem::path& out);
void stage_optimize(const RunConfig& cfg, const std::filesystem::path& out,
                    SelectMethod method);
void stage_reconstruct(const RunConfig& cfg, const std::filesystem::path& out);
void stage_evaluate(const RunConfig& cfg, const std::filesystem::path& out);

extern const std::vector<std::string> kAllStages;

/// Runs the requested stages in pipeline order. Throws with the failing
/// stage's name in the message.
void run_pipeline(const RunConfig& cfg, const std::filesystem::path& out,
                  const std::vector<std::string>& stages, SelectMethod method);

} // namespace ctopt
