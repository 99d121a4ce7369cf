#include "rlihf/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "rlihf/checkpoint.hpp"
#include "rlihf/config.hpp"

namespace rlihf::harness {
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
}

}  // namespace

std::string method_name(const RunSpec& spec) {
    std::string m(fusion::to_string(spec.condition));
    if (spec.condition == fusion::Condition::rlihf) {
        std::ostringstream os;
        os << "_w" << spec.w_hf;
        m += os.str();
    }
    return m;
}

void write_eval_csv(std::ostream& os, const std::vector<EvalRecord>& records) {
    os << "step,mean_return,return_std,success_rate,path_efficiency,path_deviation\n";
    for (const auto& r : records)
        os << r.step << ',' << num(r.mean_return) << ',' << num(r.return_std) << ',' << num(r.success_rate) << ','
           << num(r.path_efficiency) << ',' << num(r.path_deviation) << '\n';
}

void write_phase_summary(std::ostream& os, const std::vector<MethodSummary>& summaries) {
    os << "phase,method,success_rate_mean,success_rate_std,path_eff_mean,path_eff_std,path_dev_mean,path_dev_std\n";
    for (std::size_t p = 0; p < 3; ++p)
        for (const auto& m : summaries) {
            const auto& s = m.phases[p];
            os << to_string(s.phase) << ',' << m.method << ',' << num(s.success_rate.mean) << ','
               << num(s.success_rate.std) << ',' << num(s.path_efficiency.mean) << ',' << num(s.path_efficiency.std)
               << ',' << num(s.path_deviation.mean) << ',' << num(s.path_deviation.std) << '\n';
        }
}

void write_sweep_csv(std::ostream& os, const std::vector<std::pair<double, std::array<PhaseSummary, 3>>>& rows) {
    os << "w_hf,phase,return_mean,return_std,success_rate_mean,success_rate_std,path_eff_mean,path_eff_std,"
          "path_dev_mean,path_dev_std\n";
    for (const auto& [w, phases] : rows)
        for (const auto& s : phases)
            os << num(w) << ',' << to_string(s.phase) << ',' << num(s.mean_return.mean) << ','
               << num(s.mean_return.std) << ',' << num(s.success_rate.mean) << ',' << num(s.success_rate.std) << ','
               << num(s.path_efficiency.mean) << ',' << num(s.path_efficiency.std) << ','
               << num(s.path_deviation.mean) << ',' << num(s.path_deviation.std) << '\n';
}

void write_trajectory(std::ostream& os, const Rollout& rollout) {
    os << "step,x,y,carrying,collision,deviation\n";
    for (const auto& p : rollout.points)
        os << p.step << ',' << num(p.pos.x()) << ',' << num(p.pos.y()) << ',' << (p.carrying ? 1 : 0) << ','
           << (p.collision ? 1 : 0) << ',' << num(p.deviation) << '\n';
}

void write_return_svg(std::ostream& os, const std::vector<Curve>& curves) {
    constexpr double W = 640, H = 400, L = 60, R = 150, T = 20, B = 40;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto& c : curves)
        for (const auto& [x, y] : c.points) {
            if (first) {
                x0 = x1 = x;
                y0 = y1 = y;
                first = false;
            }
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    x0 = std::min(x0, 0.0);
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) {
        y0 -= 1;
        y1 += 1;
    }
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (W - R + L) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">step</text>\n";
    os << "<text x=\"" << L - 4 << "\" y=\"" << py(y1) + 4 << "\" text-anchor=\"end\">" << num(y1) << "</text>\n";
    os << "<text x=\"" << L - 4 << "\" y=\"" << py(y0) + 4 << "\" text-anchor=\"end\">" << num(y0) << "</text>\n";
    os << "<text x=\"" << px(x1) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(x1) << "</text>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* colour = colours[i % std::size(colours)];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : curves[i].points) os << num(px(x)) << ',' << num(py(y)) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (i + 1) << "\" fill=\"" << colour << "\">"
           << curves[i].name << "</text>\n";
    }
    os << "</svg>\n";
}

std::string git_blob_hash(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw std::runtime_error("sha1 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

std::vector<MethodSummary> summarize(const std::vector<RunResult>& runs, long total_steps) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<EvalRecord>> pooled;
    for (const auto& r : runs) {
        const std::string m = method_name(r.spec);
        if (!pooled.count(m)) order.push_back(m);
        auto& v = pooled[m];
        v.insert(v.end(), r.evals.begin(), r.evals.end());
    }
    std::vector<MethodSummary> out;
    for (const auto& m : order) out.push_back({m, aggregate_phases(pooled[m], total_steps)});
    return out;
}

std::vector<fs::path> emit_reports(const fs::path& out_dir, const Config& cfg, const std::vector<RunResult>& runs,
                                   std::string_view command) {
    if (runs.empty()) throw std::invalid_argument("no runs to report");
    const long total = cfg.experiment.total_steps;
    // Short runs may leave a phase without records; they still get per-run files.
    const bool phased = covers_all_phases(total, cfg.experiment.eval_interval);
    const auto summaries = phased ? summarize(runs, total) : std::vector<MethodSummary>{};

    std::vector<std::pair<double, std::array<PhaseSummary, 3>>> sweep_rows;
    if (phased && command == "sweep") {
        std::vector<double> weights;
        std::map<double, std::vector<EvalRecord>> by_weight;
        for (const auto& r : runs) {
            if (!by_weight.count(r.spec.w_hf)) weights.push_back(r.spec.w_hf);
            auto& v = by_weight[r.spec.w_hf];
            v.insert(v.end(), r.evals.begin(), r.evals.end());
        }
        for (double w : weights) sweep_rows.emplace_back(w, aggregate_phases(by_weight[w], total));
    }

    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    auto emit = [&](const fs::path& name, auto&& writer) {
        const fs::path p = out_dir / name;
        auto os = open_out(p);
        writer(os);
        if (!os) throw std::runtime_error("write failed for " + p.string());
        written.push_back(p);
    };

    nlohmann::json run_list = nlohmann::json::array();
    for (const auto& r : runs) {
        const std::string label = r.spec.label();
        emit("eval_" + label + ".csv", [&](std::ostream& os) { write_eval_csv(os, r.evals); });
        nlohmann::json entry = {{"label", label},
                                {"condition", std::string(fusion::to_string(r.spec.condition))},
                                {"w_hf", r.spec.w_hf},
                                {"seed_index", r.spec.seed_index},
                                {"seed", r.spec.seed},
                                {"episodes", r.episodes},
                                {"eval_csv", "eval_" + label + ".csv"}};
        if (r.spec.condition == fusion::Condition::rlihf) {
            entry["feedback_events"] = r.feedback_events;
            entry["online_accuracy"] = r.online_accuracy;
        }
        if (cfg.experiment.reward_log) {
            emit("reward_" + label + ".csv", [&](std::ostream& os) { fusion::write_reward_log(os, r.reward_log); });
            entry["reward_log"] = "reward_" + label + ".csv";
        }
        if (cfg.experiment.checkpoints) {
            const fs::path p = out_dir / ("policy_" + label + ".sacp");
            agent::save_policy(p, r.policy);
            written.push_back(p);
            entry["checkpoint"] = p.filename().string();
        }
        run_list.push_back(entry);
    }
    if (phased) emit("summary_phases.csv", [&](std::ostream& os) { write_phase_summary(os, summaries); });
    if (!sweep_rows.empty())
        emit("sweep_comparison.csv", [&](std::ostream& os) { write_sweep_csv(os, sweep_rows); });

    if (cfg.experiment.svg) {
        std::vector<Curve> curves;
        std::vector<std::string> order;
        std::map<std::string, std::map<long, std::pair<double, int>>> acc;
        for (const auto& r : runs) {
            const std::string m = method_name(r.spec);
            if (!acc.count(m)) order.push_back(m);
            for (const auto& e : r.evals) {
                auto& cell = acc[m][e.step];
                cell.first += e.mean_return;
                cell.second += 1;
            }
        }
        for (const auto& m : order) {
            Curve c{m, {}};
            for (const auto& [step, cell] : acc[m]) c.points.emplace_back(step, cell.first / cell.second);
            curves.push_back(std::move(c));
        }
        emit("returns.svg", [&](std::ostream& os) { write_return_svg(os, curves); });
    }

    const nlohmann::json config = to_json(cfg);
    nlohmann::json manifest = {{"manifest_version", 1},
                               {"command", std::string(command)},
                               {"input_hash", git_blob_hash(config.dump())},
                               {"config", config},
                               {"runs", run_list}};
    emit("manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    return written;
}

}  // namespace rlihf::harness
