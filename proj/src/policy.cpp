#include "opencap/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "opencap/rng.hpp"

namespace opencap::policy {

CapDecision select_caps(std::span<const double> row, const SelectionConfig& cfg) {
    const auto settings = cfg.grid.settings();
    if (row.size() != settings.size())
        throw std::invalid_argument("select_caps: row length does not cover the grid");
    if (cfg.gamma <= 0.0 || cfg.gamma >= 1.0)
        throw std::invalid_argument("select_caps: gamma must lie in (0, 1)");
    for (const double p : row)
        if (!std::isfinite(p) || p <= 0.0)
            throw std::invalid_argument("select_caps: performance entries must be positive");

    const auto baseline = cfg.grid.baseline();
    const auto base_it = std::find(settings.begin(), settings.end(), baseline);
    if (base_it == settings.end()) throw std::invalid_argument("select_caps: baseline missing");
    const double p_base = row[static_cast<std::size_t>(base_it - settings.begin())];
    const double e_base = baseline.cpu_cap_w + baseline.gpu_cap_w; // cap-sum bound at perf 1

    CapDecision best;
    bool have_best = false;
    double best_perf = 0.0;
    for (std::size_t j = 0; j < settings.size(); ++j) {
        const auto s = settings[j];
        const double p = row[j];
        const double loss = 1.0 - p / p_base;
        if (loss > cfg.gamma) continue;
        const double e_pred = static_cast<double>(s.cpu_cap_w + s.gpu_cap_w) / p;
        const double saving = (e_base - e_pred) / e_base;
        ++best.candidates_considered;
        const bool better = [&] {
            if (!have_best) return true;
            if (saving != best.pred_saving) return saving > best.pred_saving;
            if (p != best_perf) return p > best_perf;
            const int sum = s.cpu_cap_w + s.gpu_cap_w;
            const int bsum = best.setting.cpu_cap_w + best.setting.gpu_cap_w;
            if (sum != bsum) return sum < bsum;
            return s < best.setting;
        }();
        if (better) {
            best.setting = s;
            best.pred_saving = saving;
            best.pred_loss = loss;
            best_perf = p;
            have_best = true;
        }
    }
    // the baseline is always valid (its loss is exactly zero)
    if (!have_best) throw std::logic_error("select_caps: empty valid set");
    return best;
}

ProbePlan ProbePlan::default_plan(const PowerGrid& grid) {
    const auto& cc = grid.cpu_caps();
    const auto& gc = grid.gpu_caps();
    ProbePlan plan;
    const std::vector<PowerSetting> wanted{
        grid.baseline(),
        {cc.front(), gc.front()},
        {cc.front(), gc.back()},
        {cc.back(), gc.front()},
        {cc[cc.size() / 2], gc[gc.size() / 2]},
        {cc[cc.size() / 4], gc[gc.size() / 4]},
    };
    for (const auto s : wanted)
        if (std::find(plan.settings.begin(), plan.settings.end(), s) == plan.settings.end())
            plan.settings.push_back(s);
    return plan;
}

void ProbePlan::validate(const PowerGrid& grid) const {
    if (settings.empty()) throw std::invalid_argument("probe plan: no settings");
    if (probe_duration_s <= 0 || reprobe_duration_s <= 0)
        throw std::invalid_argument("probe plan: durations must be positive");
    std::set<PowerSetting> seen;
    for (const auto s : settings) {
        if (!grid.contains(s))
            throw std::invalid_argument("probe plan: setting outside grid: " + setting_label(s));
        if (!seen.insert(s).second)
            throw std::invalid_argument("probe plan: duplicate setting: " + setting_label(s));
    }
    if (!seen.count(grid.baseline())) throw std::invalid_argument("probe plan: baseline not probed");
}

std::vector<std::pair<PowerSetting, double>> probe_app(const sim::WorkloadSpec& spec,
                                                       const ProbePlan& plan,
                                                       const pred::PredictorModel& predictor) {
    std::vector<std::pair<PowerSetting, double>> out;
    out.reserve(plan.settings.size());
    for (const auto s : plan.settings)
        out.emplace_back(s, pred::predict_perf(predictor, sim::sample_counters(spec, s)));
    return out;
}

OnlineConfig OnlineConfig::defaults(const PowerGrid& grid) {
    OnlineConfig cfg{{grid, 0.05}, ProbePlan::default_plan(grid), phase::DetectorConfig{},
                     cf::NcfHyper{}, 120.0};
    return cfg;
}

OnlineOutcome run_open_online(const sim::WorkloadSpec& spec, const PerformanceMatrix& dense,
                              const pred::PredictorModel& predictor, const OnlineConfig& cfg,
                              std::uint64_t seed) {
    cfg.plan.validate(cfg.selection.grid);
    cfg.detector.validate();

    Rng trace_rng(derive_seed(seed, "online.trace." + spec.app_id));
    phase::Detector det(cfg.detector);
    const double dt = cfg.detector.delta_s;

    OnlineOutcome outcome;
    double now = 0.0;
    double cpu_work_left = spec.cpu_phase_s;
    // The detector arms on the first below-threshold reading: a transition is
    // a low->high event, so an application that is GPU-busy from the start
    // never reports one.
    bool armed = false;

    const auto stream = [&](PowerSetting s, double duration) {
        const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
        for (std::size_t i = 0; i < steps; ++i) {
            const bool in_cpu = cpu_work_left > 0.0;
            const double gp =
                sim::jitter_power(sim::gpu_power_base(spec, s, in_cpu), s.gpu_cap_w, trace_rng);
            if (in_cpu) cpu_work_left -= sim::cpu_factor(spec, s) * dt;
            now += dt;
            if (!armed && gp < cfg.detector.p_th_w) armed = true;
            if (armed && !outcome.transition_detected &&
                det.feed(gp) == phase::Decision::transition) {
                outcome.transition_detected = true;
                outcome.transition_time_s = now;
                return true;
            }
        }
        return false;
    };

    std::vector<std::pair<PowerSetting, double>> estimates;
    for (const auto s : cfg.plan.settings) {
        const bool started_in_cpu = cpu_work_left > 0.0;
        const bool hit = stream(s, cfg.plan.probe_duration_s);
        const auto counters = started_in_cpu ? sim::sample_counters_cpu_phase(spec, s)
                                             : sim::sample_counters(spec, s);
        estimates.emplace_back(s, pred::predict_perf(predictor, counters));
        if (hit) break;
    }

    if (armed && !outcome.transition_detected) {
        // the CPU phase is still running; keep watching under baseline caps
        const auto base = cfg.selection.grid.baseline();
        const double budget_end = now + cfg.max_monitor_s;
        while (!outcome.transition_detected && now < budget_end) stream(base, dt);
    }

    if (outcome.transition_detected) {
        // the pre-transition estimates misrepresent the GPU phase: drop them
        // and re-probe every plan setting briefly
        estimates.clear();
        for (const auto s : cfg.plan.settings) {
            stream(s, cfg.plan.reprobe_duration_s);
            estimates.emplace_back(s, pred::predict_perf(predictor, sim::sample_counters(spec, s)));
        }
    }

    PerformanceMatrix sparse = dense;
    sparse.append_row(spec.app_id);
    for (const auto& [s, est] : estimates) sparse.set(spec.app_id, s, est);
    const auto completed = cf::complete(sparse, cfg.ncf, derive_seed(seed, "online.ncf." + spec.app_id));

    const auto row_idx = completed.app_index(spec.app_id);
    outcome.completed_row.resize(completed.cols());
    for (std::size_t j = 0; j < completed.cols(); ++j)
        outcome.completed_row[j] = completed.value(row_idx, j);

    outcome.probes = std::move(estimates);
    outcome.decision = select_caps(outcome.completed_row, cfg.selection);
    return outcome;
}

const char* policy_name(PolicyKind p) {
    switch (p) {
        case PolicyKind::open: return "open";
        case PolicyKind::no_cap: return "no_cap";
        case PolicyKind::gpu_cap_only: return "gpu_cap_only";
        case PolicyKind::cpu_cap_only: return "cpu_cap_only";
        case PolicyKind::oracle: return "oracle";
    }
    throw std::logic_error("bad policy kind");
}

PolicyKind parse_policy(const std::string& name) {
    if (name == "open") return PolicyKind::open;
    if (name == "no_cap") return PolicyKind::no_cap;
    if (name == "gpu_cap_only") return PolicyKind::gpu_cap_only;
    if (name == "cpu_cap_only") return PolicyKind::cpu_cap_only;
    if (name == "oracle") return PolicyKind::oracle;
    throw config_error("unknown policy: " + name);
}

TruthEntry measure_truth(const sim::WorkloadSpec& spec, PowerSetting setting, PowerSetting baseline,
                         int repetitions, std::uint64_t seed) {
    if (repetitions < 1) throw std::invalid_argument("measure_truth: repetitions < 1");
    struct Rep {
        double runtime, perf, power, eff, energy, avg_power;
    };
    std::vector<Rep> reps;
    for (int r = 0; r < repetitions; ++r) {
        const auto rep_seed = derive_seed(seed, "rep", static_cast<std::uint64_t>(r));
        const auto base = sim::run(spec, baseline, rep_seed);
        const auto capped = sim::run(spec, setting, rep_seed);
        Rep rep;
        rep.runtime = capped.runtime_s;
        rep.perf = base.runtime_s / capped.runtime_s;
        rep.power = capped.avg_power_w / base.avg_power_w;
        rep.eff = rep.perf / rep.power;
        rep.energy = capped.energy_j;
        rep.avg_power = capped.avg_power_w;
        reps.push_back(rep);
    }
    // drop the fastest and slowest repetition before averaging
    if (reps.size() >= 3) {
        const auto slow = std::max_element(reps.begin(), reps.end(),
                                           [](const Rep& a, const Rep& b) { return a.runtime < b.runtime; });
        reps.erase(slow);
        const auto fast = std::min_element(reps.begin(), reps.end(),
                                           [](const Rep& a, const Rep& b) { return a.runtime < b.runtime; });
        reps.erase(fast);
    }
    TruthEntry entry;
    entry.norm_perf = entry.norm_power = entry.efficiency = entry.energy_j = entry.avg_power_w = 0.0;
    for (const auto& rep : reps) {
        entry.norm_perf += rep.perf;
        entry.norm_power += rep.power;
        entry.efficiency += rep.eff;
        entry.energy_j += rep.energy;
        entry.avg_power_w += rep.avg_power;
    }
    const double n = static_cast<double>(reps.size());
    entry.norm_perf /= n;
    entry.norm_power /= n;
    entry.efficiency /= n;
    entry.energy_j /= n;
    entry.avg_power_w /= n;
    return entry;
}

namespace {

// Alg-2-style saving of a setting evaluated at its true performance
double saving_at(PowerSetting s, double perf, PowerSetting baseline) {
    const double e_base = baseline.cpu_cap_w + baseline.gpu_cap_w;
    return (e_base - static_cast<double>(s.cpu_cap_w + s.gpu_cap_w) / perf) / e_base;
}

std::vector<PowerSetting> candidate_set(PolicyKind kind, const PowerGrid& grid) {
    const auto baseline = grid.baseline();
    switch (kind) {
        case PolicyKind::no_cap: return {baseline};
        case PolicyKind::gpu_cap_only: {
            std::vector<PowerSetting> out;
            for (const int g : grid.gpu_caps()) out.push_back({baseline.cpu_cap_w, g});
            return out;
        }
        case PolicyKind::cpu_cap_only: {
            std::vector<PowerSetting> out;
            for (const int c : grid.cpu_caps()) out.push_back({c, baseline.gpu_cap_w});
            return out;
        }
        case PolicyKind::oracle: return grid.settings();
        case PolicyKind::open: break;
    }
    throw std::invalid_argument("candidate_set: open is not an exhaustive policy");
}

// max measured efficiency subject to measured loss <= gamma
PowerSetting choose_exhaustive(const std::vector<PowerSetting>& candidates,
                               const std::map<PowerSetting, TruthEntry>& table, double gamma,
                               PowerSetting baseline) {
    PowerSetting best = baseline;
    const TruthEntry* best_entry = &table.at(baseline);
    for (const auto s : candidates) {
        const auto& e = table.at(s);
        if (1.0 - e.norm_perf > gamma) continue;
        const auto& b = *best_entry;
        const bool better = [&] {
            if (e.efficiency != b.efficiency) return e.efficiency > b.efficiency;
            if (e.norm_perf != b.norm_perf) return e.norm_perf > b.norm_perf;
            const int sum = s.cpu_cap_w + s.gpu_cap_w;
            const int bsum = best.cpu_cap_w + best.gpu_cap_w;
            if (sum != bsum) return sum < bsum;
            return s < best;
        }();
        if (better) {
            best = s;
            best_entry = &e;
        }
    }
    return best;
}

EvalRow row_from_truth(const std::string& app, const std::string& policy, double gamma,
                       PowerSetting s, const TruthEntry& e, PowerSetting baseline) {
    EvalRow row;
    row.app = app;
    row.policy = policy;
    row.gamma = gamma;
    row.setting = s;
    row.true_perf = e.norm_perf;
    row.true_loss = 1.0 - e.norm_perf;
    row.energy_j = e.energy_j;
    row.avg_power_w = e.avg_power_w;
    row.efficiency = e.efficiency;
    row.pred_saving = saving_at(s, e.norm_perf, baseline);
    return row;
}

} // namespace

EvalConfig EvalConfig::defaults(const PowerGrid& grid) { return {OnlineConfig::defaults(grid), 5}; }

EvalRow run_baseline(const sim::WorkloadSpec& spec, PolicyKind kind, const EvalConfig& cfg,
                     std::uint64_t seed) {
    if (kind == PolicyKind::open)
        throw std::invalid_argument("run_baseline: use run_open_online for the open policy");
    const auto& grid = cfg.online.selection.grid;
    const auto baseline = grid.baseline();
    const auto candidates = candidate_set(kind, grid);
    const auto app_seed = derive_seed(seed, "eval." + spec.app_id);
    std::map<PowerSetting, TruthEntry> table;
    table[baseline] = measure_truth(spec, baseline, baseline, cfg.repetitions, app_seed);
    for (const auto s : candidates)
        if (!table.count(s)) table[s] = measure_truth(spec, s, baseline, cfg.repetitions, app_seed);
    const auto chosen = choose_exhaustive(candidates, table, cfg.online.selection.gamma, baseline);
    return row_from_truth(spec.app_id, policy_name(kind), cfg.online.selection.gamma, chosen,
                          table.at(chosen), baseline);
}

EvalReport evaluate_suite(const std::vector<sim::WorkloadSpec>& suite,
                          const std::vector<PolicyKind>& policies, const PerformanceMatrix& dense,
                          const pred::PredictorModel& predictor, const EvalConfig& cfg,
                          std::uint64_t seed) {
    const auto& grid = cfg.online.selection.grid;
    const auto baseline = grid.baseline();
    const double gamma = cfg.online.selection.gamma;
    EvalReport report;

    for (const auto& spec : suite) {
        const auto app_seed = derive_seed(seed, "eval." + spec.app_id);
        std::map<PowerSetting, TruthEntry> table;
        for (const auto s : grid.settings())
            table[s] = measure_truth(spec, s, baseline, cfg.repetitions, app_seed);

        for (const auto kind : policies) {
            if (kind == PolicyKind::open) {
                const auto outcome =
                    run_open_online(spec, dense, predictor, cfg.online, derive_seed(seed, "open." + spec.app_id));
                auto row = row_from_truth(spec.app_id, policy_name(kind), gamma,
                                          outcome.decision.setting, table.at(outcome.decision.setting),
                                          baseline);
                row.pred_saving = outcome.decision.pred_saving;
                report.rows.push_back(std::move(row));
            } else {
                const auto candidates = candidate_set(kind, grid);
                const auto chosen = choose_exhaustive(candidates, table, gamma, baseline);
                report.rows.push_back(row_from_truth(spec.app_id, policy_name(kind), gamma, chosen,
                                                     table.at(chosen), baseline));
            }
        }
    }

    for (const auto kind : policies) {
        PolicyAggregate agg;
        agg.policy = policy_name(kind);
        std::size_t n = 0;
        for (const auto& row : report.rows) {
            if (row.policy != agg.policy) continue;
            agg.mean_efficiency += row.efficiency;
            agg.mean_true_loss += row.true_loss;
            agg.mean_true_perf += row.true_perf;
            ++n;
        }
        if (n > 0) {
            agg.mean_efficiency /= static_cast<double>(n);
            agg.mean_true_loss /= static_cast<double>(n);
            agg.mean_true_perf /= static_cast<double>(n);
            agg.mean_gain_vs_no_cap = agg.mean_efficiency - 1.0;
        }
        report.aggregates.push_back(std::move(agg));
    }
    return report;
}

void write_eval_csv(const EvalReport& report, std::ostream& out) {
    out << "app,policy,gamma,cpu_cap_w,gpu_cap_w,true_perf,true_loss,energy_j,avg_power_w,"
           "efficiency,pred_saving\n";
    for (const auto& r : report.rows)
        out << r.app << ',' << r.policy << ',' << format_double(r.gamma) << ',' << r.setting.cpu_cap_w
            << ',' << r.setting.gpu_cap_w << ',' << format_double(r.true_perf) << ','
            << format_double(r.true_loss) << ',' << format_double(r.energy_j) << ','
            << format_double(r.avg_power_w) << ',' << format_double(r.efficiency) << ','
            << format_double(r.pred_saving) << '\n';
}

void write_eval_csv(const EvalReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_eval_csv(report, f);
}

std::string aggregates_json(const EvalReport& report) {
    nlohmann::json doc;
    for (const auto& a : report.aggregates) {
        doc[a.policy] = {{"mean_efficiency", a.mean_efficiency},
                         {"mean_gain_vs_no_cap", a.mean_gain_vs_no_cap},
                         {"mean_true_loss", a.mean_true_loss},
                         {"mean_true_perf", a.mean_true_perf}};
    }
    return doc.dump(2);
}

} // namespace opencap::policy
