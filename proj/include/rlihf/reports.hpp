#pragma once

#include <array>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rlihf/harness.hpp"

namespace rlihf::harness {

/// Run label without the seed suffix; runs sharing it are pooled in summaries.
std::string method_name(const RunSpec& spec);

void write_eval_csv(std::ostream& os, const std::vector<EvalRecord>& records);

struct MethodSummary {
    std::string method;
    std::array<PhaseSummary, 3> phases;
};

/// phase,method,success_rate_mean,success_rate_std,path_eff_mean,path_eff_std,path_dev_mean,path_dev_std
void write_phase_summary(std::ostream& os, const std::vector<MethodSummary>& summaries);

/// Per-weight comparison including returns, one row per (weight, phase).
void write_sweep_csv(std::ostream& os, const std::vector<std::pair<double, std::array<PhaseSummary, 3>>>& rows);

/// step,x,y,carrying,collision,deviation
void write_trajectory(std::ostream& os, const Rollout& rollout);

struct Curve {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (step, value)
};
void write_return_svg(std::ostream& os, const std::vector<Curve>& curves);

/// Hash of `content` as git stores it ("blob <size>\0" prefix), lowercase hex SHA-1.
std::string git_blob_hash(std::string_view content);

/// Groups runs by method (first-appearance order) and aggregates phases over seeds.
std::vector<MethodSummary> summarize(const std::vector<RunResult>& runs, long total_steps);

/// Writes per-run eval CSVs, the phase summary (when every phase has an eval
/// point), a manifest, and optional plots,
/// checkpoints and reward logs. `command` is recorded in the manifest; "sweep"
/// adds the per-weight comparison CSV. Throws before touching the disk when
/// `runs` is empty. Returns the written paths.
std::vector<std::filesystem::path> emit_reports(const std::filesystem::path& out_dir, const Config& cfg,
                                                const std::vector<RunResult>& runs, std::string_view command);

}  // namespace rlihf::harness
