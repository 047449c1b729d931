// saivla: desk-scale runtime and simulator for the tripartite control stack.
// Subcommands: simulate, decode, label, cache, bench, train-toy, metrics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "saivla/cache.hpp"
#include "saivla/decoder.hpp"
#include "saivla/errors.hpp"
#include "saivla/labeling.hpp"
#include "saivla/metrics.hpp"
#include "saivla/numerics.hpp"
#include "saivla/paracat.hpp"
#include "saivla/prompt.hpp"
#include "saivla/run_config.hpp"
#include "saivla/scheduler.hpp"
#include "saivla/train.hpp"

namespace {

using namespace saivla;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;
constexpr int kExitUsage = 64;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// Options shared by every subcommand; flag values beat the config file,
// which beats the built-in defaults (seed additionally falls back to
// SAIVLA_SEED).
struct CommonOpts {
    std::string config_path;
    std::map<std::string, CLI::Option*> bound;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "declarative run config (JSON)");
        bound["n"] = cmd->add_option("--n", "brain interval in chunks");
        bound["k"] = cmd->add_option("--k", "steps per cerebellum forward");
        bound["d"] = cmd->add_option("--d", "action dimensions");
        bound["nc"] = cmd->add_option("--nc", "context token count");
        bound["delta_p_mm"] = cmd->add_option("--delta-p", "position grid, mm");
        bound["delta_theta_deg"] = cmd->add_option("--delta-theta", "rotation grid, deg");
        bound["theta"] = cmd->add_option("--theta", "hysteresis margin");
        bound["alpha"] = cmd->add_option("--alpha", "EMA coefficient");
        bound["tau_start"] = cmd->add_option("--tau-start", "anneal start temperature");
        bound["tau_end"] = cmd->add_option("--tau-end", "anneal end temperature");
        bound["tau_horizon"] = cmd->add_option("--tau-horizon", "anneal horizon, steps");
        bound["f_fwd"] = cmd->add_option("--f-fwd", "cerebellum forward rate, Hz");
        bound["seed"] = cmd->add_option("--seed", "rng seed");
        bound["output_dir"] = cmd->add_option("--output-dir", "artifact directory");
    }

    RunConfig resolve() const {
        std::optional<std::string> cfg_text;
        if (!config_path.empty()) cfg_text = read_file(config_path);
        std::map<std::string, std::string> overrides;
        for (const auto& [key, opt] : bound) {
            if (opt->count() > 0) overrides[key] = opt->results().back();
        }
        return merge_run_config(RunConfig{}, cfg_text, overrides);
    }
};

void print_stanza(const RunConfig& cfg) { std::cout << repro_stanza(cfg) << "\n"; }

std::string artifact_header(const RunConfig& cfg) {
    // Deterministic: no wall-clock in artifacts, only in the stdout stanza.
    return "# seed=" + std::to_string(cfg.seed) + " config_hash=" + cfg.config_hash() +
           " version=" + kVersion + "\n";
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const RunConfig& cfg, std::size_t chunks, const std::string& sweep,
                 const std::string& trace_path, double flops_brain,
                 double flops_cere_fwd, double flops_cere_step, double success) {
    ScheduleConfig sc;
    sc.brain_interval = cfg.brain_interval;
    sc.chunk_steps = cfg.chunk_steps;
    sc.f_fwd = cfg.f_fwd;
    sc.flops_brain_once = flops_brain;
    sc.flops_cere_per_fwd = flops_cere_fwd;
    sc.flops_cere_per_step = flops_cere_step;

    if (!sweep.empty()) {
        // --sweep n=3,5,10: one row per interval, same chunk/rate settings.
        if (sweep.rfind("n=", 0) != 0) {
            throw InvalidArgument("--sweep expects the form n=3,5,10");
        }
        std::vector<std::size_t> ns;
        std::stringstream ss(sweep.substr(2));
        std::string item;
        while (std::getline(ss, item, ',')) ns.push_back(std::stoull(item));
        if (ns.empty()) throw InvalidArgument("--sweep lists no intervals");

        std::ostringstream table;
        table << "n\tc_budget\tf_fwd\tf_eff\tbrain_calls\tsteps\tsr_cn\n";
        for (std::size_t n : ns) {
            ScheduleConfig row = sc;
            row.brain_interval = n;
            const ScheduleTrace trace = simulate(row, chunks, cfg.seed);
            const double budget = compute_budget(row, BudgetMode::PerForward);
            table << n << "\t" << fmt(budget) << "\t" << fmt(trace.summary.f_fwd_achieved)
                  << "\t" << fmt(trace.summary.f_eff) << "\t" << trace.summary.brain_calls
                  << "\t" << trace.summary.steps << "\t"
                  << (budget > 0.0 ? fmt(sr_cn(success, budget)) : "n/a") << "\n";
        }
        std::cout << table.str();
        if (!trace_path.empty()) {
            std::ofstream out(trace_path);
            if (!out) throw IoError("cannot write " + trace_path);
            out << artifact_header(cfg) << table.str();
        }
        print_stanza(cfg);
        return kExitOk;
    }

    const ScheduleTrace trace = simulate(sc, chunks, cfg.seed);
    if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) throw IoError("cannot write " + trace_path);
        out << artifact_header(cfg);
        for (const ScheduleEvent& e : trace.events) {
            out << fmt(e.t) << " " << event_kind_name(e.kind) << " chunk=" << e.chunk
                << " step=" << e.step << " latency_ms=" << fmt(e.latency_ms) << "\n";
        }
    }
    const ScheduleSummary& s = trace.summary;
    std::cout << "chunks=" << s.chunks << " brain_calls=" << s.brain_calls
              << " steps=" << s.steps << "\n";
    std::cout << "f_fwd=" << fmt(s.f_fwd_achieved) << "Hz f_eff=" << fmt(s.f_eff)
              << "Hz duration=" << fmt(s.duration_s) << "s\n";
    std::cout << "mean_brain_latency_ms=" << fmt(s.mean_brain_latency_ms)
              << " mean_cere_latency_ms=" << fmt(s.mean_cere_latency_ms) << "\n";
    const double budget_fwd = compute_budget(sc, BudgetMode::PerForward);
    const double budget_step = compute_budget(sc, BudgetMode::PerStep);
    std::cout << "c_budget(per_forward)=" << fmt(budget_fwd)
              << " c_budget(per_step)=" << fmt(budget_step) << "\n";
    if (budget_fwd > 0.0) {
        std::cout << "sr_cn(success=" << fmt(success)
                  << ", per_forward)=" << fmt(sr_cn(success, budget_fwd)) << "\n";
    }
    print_stanza(cfg);
    return kExitOk;
}

// ------------------------------------------------------------------ decode

struct ProbStream {
    bool logits = false;
    std::size_t k = 0;
    std::size_t d = 0;
    // per chunk, per step: D cells of 3 values
    std::vector<std::vector<std::vector<std::array<double, 3>>>> chunks;
};

ProbStream read_prob_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    ProbStream ps;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            std::stringstream ss(line);
            std::string tag, version, kv;
            ss >> tag >> version;
            if ((tag != "svc-probs" && tag != "svc-logits") || version != "v1") {
                throw InvalidArgument(path + ": expected 'svc-probs v1' or "
                                             "'svc-logits v1' header");
            }
            ps.logits = (tag == "svc-logits");
            while (ss >> kv) {
                if (kv.rfind("k=", 0) == 0) ps.k = std::stoull(kv.substr(2));
                if (kv.rfind("d=", 0) == 0) ps.d = std::stoull(kv.substr(2));
            }
            if (ps.k == 0 || ps.d == 0) {
                throw InvalidArgument(path + ": header must carry k= and d=");
            }
            have_header = true;
            continue;
        }
        std::stringstream ss(line);
        std::vector<std::vector<std::array<double, 3>>> chunk(
            ps.k, std::vector<std::array<double, 3>>(ps.d));
        for (std::size_t k = 0; k < ps.k; ++k) {
            for (std::size_t j = 0; j < ps.d; ++j) {
                for (std::size_t c = 0; c < 3; ++c) {
                    if (!(ss >> chunk[k][j][c])) {
                        throw InvalidArgument(path + ": short record line");
                    }
                }
            }
        }
        double extra;
        if (ss >> extra) throw InvalidArgument(path + ": trailing values on record line");
        ps.chunks.push_back(std::move(chunk));
    }
    if (!have_header) throw InvalidArgument(path + ": missing header");
    return ps;
}

int cmd_decode(const RunConfig& cfg, const std::string& input,
               const std::string& output) {
    const ProbStream ps = read_prob_stream(input);

    DecoderConfig dc = DecoderConfig::defaults(ps.d);
    dc.theta_up = dc.theta_down = cfg.theta;
    dc.alpha = cfg.alpha;
    dc.temperature.start = cfg.tau_start;
    dc.temperature.end = cfg.tau_end;
    dc.temperature.horizon = cfg.tau_horizon;
    for (std::size_t j = 0; j < ps.d; ++j) dc.step_sizes[j] = cfg.delta_p_mm;
    dc.validate();

    DecoderState state = DecoderState::initial(ps.d);
    const double dt = 1.0 / (cfg.f_fwd * static_cast<double>(ps.k));

    std::ostringstream body;
    std::size_t step_index = 0;
    for (const auto& chunk : ps.chunks) {
        for (const auto& step_cells : chunk) {
            std::vector<ProbVector3> probs(ps.d);
            for (std::size_t j = 0; j < ps.d; ++j) {
                if (ps.logits) {
                    const double tau = anneal_temperature(step_index, dc);
                    probs[j] = softmax_temp3(step_cells[j], tau);
                } else {
                    probs[j] = make_prob3(step_cells[j][0], step_cells[j][1],
                                          step_cells[j][2]);
                }
            }
            const std::vector<Ternary> decisions = decode_step(probs, state, dc);
            const std::vector<double> commands = ema_update(state, decisions, dc);
            body << step_index;
            for (Ternary v : decisions) body << " " << static_cast<int>(v);
            for (double u : commands) body << " " << fmt(u);
            body << "\n";
            ++step_index;
        }
    }

    std::ofstream out(output);
    if (!out) throw IoError("cannot write " + output);
    out << artifact_header(cfg);
    out << "svc-decode v1 d=" << ps.d << " dt=" << fmt(dt) << "\n";
    out << body.str();
    std::cout << "decoded " << step_index << " steps over " << ps.chunks.size()
              << " chunks -> " << output << "\n";
    print_stanza(cfg);
    return kExitOk;
}

// ------------------------------------------------------------------- label

int cmd_label(const RunConfig& cfg, const std::string& input, const std::string& output,
              double deadband, std::size_t smooth_window, std::int64_t timestamp) {
    std::ifstream in(input);
    if (!in) throw IoError("cannot open " + input);
    std::string line;
    std::size_t dims = 0;
    bool have_header = false;
    std::vector<double> timestamps;
    std::vector<std::vector<double>> deltas;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            std::stringstream ss(line);
            std::string tag, version, kv;
            ss >> tag >> version;
            if (tag != "svc-traj" || version != "v1") {
                throw InvalidArgument(input + ": expected 'svc-traj v1' header");
            }
            while (ss >> kv) {
                if (kv.rfind("d=", 0) == 0) dims = std::stoull(kv.substr(2));
            }
            if (dims == 0) throw InvalidArgument(input + ": header must carry d=");
            have_header = true;
            continue;
        }
        std::stringstream ss(line);
        double ts;
        if (!(ss >> ts)) throw InvalidArgument(input + ": bad timestamp line");
        std::vector<double> row(dims);
        for (std::size_t j = 0; j < dims; ++j) {
            if (!(ss >> row[j])) throw InvalidArgument(input + ": short delta row");
        }
        timestamps.push_back(ts);
        deltas.push_back(std::move(row));
    }
    if (!have_header || deltas.empty()) {
        throw InvalidArgument(input + ": no trajectory data");
    }

    ControlGrid grid = ControlGrid::uniform(dims, cfg.delta_p_mm);
    grid.deadbands.assign(dims, deadband);
    grid.validate();

    const auto labels = quantize_deltas(deltas, grid);
    const auto weights = outlier_weights(deltas, timestamps);
    const Smoothing smoothing = smooth_window > 1 ? Smoothing::Majority : Smoothing::Off;
    const LabelChunks chunks = align_to_grid(labels, cfg.chunk_steps, smoothing,
                                             smooth_window > 1 ? smooth_window : 3);

    const std::size_t T = deltas.size();
    Matrix m_deltas(T, dims), m_labels(T, dims);
    Matrix m_ts(1, T), m_weights(1, T);
    for (std::size_t t = 0; t < T; ++t) {
        m_ts(0, t) = timestamps[t];
        m_weights(0, t) = weights[t];
        for (std::size_t j = 0; j < dims; ++j) {
            m_deltas(t, j) = deltas[t][j];
            m_labels(t, j) = static_cast<double>(labels[t][j]);
        }
    }
    const std::size_t n_chunks = chunks.chunks.size();
    Matrix m_chunks(n_chunks * cfg.chunk_steps, dims);
    Matrix m_mask(n_chunks, cfg.chunk_steps);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        for (std::size_t k = 0; k < cfg.chunk_steps; ++k) {
            m_mask(c, k) = chunks.masks[c][k] ? 1.0 : 0.0;
            for (std::size_t j = 0; j < dims; ++j) {
                m_chunks(c * cfg.chunk_steps + k, j) =
                    static_cast<double>(chunks.chunks[c][k][j]);
            }
        }
    }

    CacheManifest manifest;
    manifest.version_hash = "labels-v1";
    manifest.dataset_id = input;
    manifest.task_id = "label";
    manifest.big_brain_id = "none";
    manifest.tokenizer_id = "none";
    manifest.prompt_id = "none";
    manifest.prompt_hash = "";
    manifest.d_model = 0;
    manifest.n_context = 0;
    manifest.k_chunk = cfg.chunk_steps;
    manifest.timestamp_utc = timestamp;
    manifest.dependencies["saivla"] = kVersion;

    std::vector<NamedTensor> tensors;
    tensors.push_back({"timestamps", std::move(m_ts), Dtype::F64});
    tensors.push_back({"deltas", std::move(m_deltas), Dtype::F64});
    tensors.push_back({"labels", std::move(m_labels), Dtype::F32});
    tensors.push_back({"frame_weights", std::move(m_weights), Dtype::F64});
    tensors.push_back({"chunk_labels", std::move(m_chunks), Dtype::F32});
    tensors.push_back({"chunk_mask", std::move(m_mask), Dtype::F32});
    write_archive(manifest, tensors, output);

    std::cout << "labeled " << T << " steps x " << dims << " dims into " << n_chunks
              << " chunks -> " << output << "\n";
    print_stanza(cfg);
    return kExitOk;
}

// ------------------------------------------------------------------- cache

int cmd_cache_validate(const RunConfig& cfg, const std::string& path,
                       const std::string& expect_hash) {
    std::optional<std::string> expected;
    if (!expect_hash.empty()) expected = expect_hash;
    const ValidationReport report = validate_archive(path, expected);
    for (const ValidationCheck& c : report.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) std::cout << ": " << c.detail;
        std::cout << "\n";
    }
    print_stanza(cfg);
    return report.all_pass() ? kExitOk : kExitValidation;
}

// ------------------------------------------------------------------- bench

int cmd_bench(const RunConfig& cfg, const std::string& workload, double sleep_ms,
              std::size_t repeats, std::size_t warmup, const std::string& report_path) {
    EnvironmentDescriptor env;
    env.device = "cpu";
    env.resolution = "256x256";
    env.batch = 1;

    std::function<void()> fn;
    if (workload == "sleep") {
        fn = [sleep_ms] {
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(sleep_ms));
        };
    } else if (workload == "paracat") {
        HeadConfig hc;
        hc.depth = 2;
        hc.d_model = 64;
        hc.heads = 4;
        hc.chunk_steps = cfg.chunk_steps;
        hc.action_dims = cfg.action_dims;
        hc.max_image_tokens = 64;
        hc.max_text_tokens = 16;
        auto params = std::make_shared<HeadParams>(HeadParams::random(hc, cfg.seed));
        auto bundle = std::make_shared<TokenBundle>();
        bundle->context = Matrix(cfg.context_tokens, hc.d_model);
        bundle->image = Matrix(16, hc.d_model);
        bundle->text = Matrix(4, hc.d_model);
        bundle->state = Matrix(1, hc.d_model);
        fn = [params, bundle, hc] { paracat_forward(*bundle, *params, hc); };
    } else {
        throw InvalidArgument("unknown workload '" + workload + "' (sleep|paracat)");
    }

    const TimingReport report = timing_protocol(fn, repeats, warmup, env);
    std::cout << "workload=" << workload << " median_ms=" << fmt(report.median_ms)
              << " iqr_ms=" << fmt(report.iqr_ms) << " repeats=" << report.repeats
              << "\n";
    std::cout << "environment: device=" << report.environment.device
              << " resolution=" << report.environment.resolution
              << " batch=" << report.environment.batch << "\n";
    std::cout << "note: " << report.amortization_note << "\n";
    if (!report_path.empty()) {
        nlohmann::json j;
        j["workload"] = workload;
        j["median_ms"] = report.median_ms;
        j["iqr_ms"] = report.iqr_ms;
        j["repeats"] = report.repeats;
        j["warmup"] = report.warmup;
        j["samples_ms"] = report.samples_ms;
        j["environment"] = {{"device", report.environment.device},
                            {"resolution", report.environment.resolution},
                            {"batch", report.environment.batch}};
        j["amortization_note"] = report.amortization_note;
        j["seed"] = cfg.seed;
        j["config_hash"] = cfg.config_hash();
        std::ofstream out(report_path);
        if (!out) throw IoError("cannot write " + report_path);
        out << j.dump(2) << "\n";
    }
    print_stanza(cfg);
    return kExitOk;
}

// --------------------------------------------------------------- train-toy

int cmd_train_toy(const RunConfig& cfg, std::size_t depth, std::size_t d_model,
                  std::size_t heads, std::size_t steps, std::size_t batch, double lr,
                  const std::string& params_path, const std::string& report_path,
                  std::int64_t timestamp) {
    HeadConfig hc;
    hc.depth = depth;
    hc.d_model = d_model;
    hc.heads = heads;
    hc.chunk_steps = cfg.chunk_steps;
    hc.action_dims = cfg.action_dims;
    hc.max_image_tokens = 8;
    hc.max_text_tokens = 8;

    ToyTaskSpec task;
    task.steps = steps;
    task.batch = batch;
    task.optimizer.lr = lr;
    task.seed = cfg.seed;

    const ToyTrainResult result = train_toy(task, hc);
    std::cout << "steps=" << result.steps_run << " final_loss=" << fmt(result.final_loss)
              << "\n";
    std::cout << "mean_accuracy=" << fmt(result.mean_accuracy)
              << " min_dim_accuracy=" << fmt(result.min_dim_accuracy) << "\n";
    if (!params_path.empty()) {
        save_head_params(result.params, hc, params_path, timestamp);
        std::cout << "params -> " << params_path << "\n";
    }
    if (!report_path.empty()) {
        nlohmann::json j;
        j["steps"] = result.steps_run;
        j["final_loss"] = result.final_loss;
        j["mean_accuracy"] = result.mean_accuracy;
        j["min_dim_accuracy"] = result.min_dim_accuracy;
        j["dim_accuracy"] = result.dim_accuracy;
        j["seed"] = cfg.seed;
        j["config_hash"] = cfg.config_hash();
        j["batch"] = batch;
        j["lr"] = lr;
        std::ofstream out(report_path);
        if (!out) throw IoError("cannot write " + report_path);
        out << j.dump(2) << "\n";
    }
    print_stanza(cfg);
    return kExitOk;
}

// ----------------------------------------------------------------- metrics

int cmd_metrics(const RunConfig& cfg, const std::string& trace_path,
                const std::string& report_path) {
    std::ifstream in(trace_path);
    if (!in) throw IoError("cannot open " + trace_path);
    std::string line;
    std::size_t dims = 0;
    double dt = 0.0;
    bool have_header = false;
    std::vector<std::vector<Ternary>> decisions;
    std::vector<std::vector<double>> commands;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            std::stringstream ss(line);
            std::string tag, version, kv;
            ss >> tag >> version;
            if (tag != "svc-decode" || version != "v1") {
                throw InvalidArgument(trace_path + ": expected 'svc-decode v1' header");
            }
            while (ss >> kv) {
                if (kv.rfind("d=", 0) == 0) dims = std::stoull(kv.substr(2));
                if (kv.rfind("dt=", 0) == 0) dt = std::stod(kv.substr(3));
            }
            if (dims == 0 || !(dt > 0.0)) {
                throw InvalidArgument(trace_path + ": header must carry d= and dt=");
            }
            have_header = true;
            continue;
        }
        std::stringstream ss(line);
        std::size_t step;
        ss >> step;
        std::vector<Ternary> d_row(dims);
        std::vector<double> u_row(dims);
        for (std::size_t j = 0; j < dims; ++j) {
            int v;
            if (!(ss >> v)) throw InvalidArgument(trace_path + ": short decision row");
            d_row[j] = static_cast<Ternary>(v);
        }
        for (std::size_t j = 0; j < dims; ++j) {
            if (!(ss >> u_row[j])) throw InvalidArgument(trace_path + ": short command row");
        }
        decisions.push_back(std::move(d_row));
        commands.push_back(std::move(u_row));
    }
    if (!have_header) throw InvalidArgument(trace_path + ": missing header");

    const StabilityReport report = stability_report(decisions, commands, dt);
    double mean_jitter = 0.0, mean_jerk = 0.0;
    for (std::size_t j = 0; j < dims; ++j) {
        mean_jitter += report.jitter_rate[j];
        mean_jerk += report.jerk[j].mean_abs;
        std::cout << "dim=" << j << " jitter_rate=" << fmt(report.jitter_rate[j])
                  << " mean_abs_jerk=" << fmt(report.jerk[j].mean_abs)
                  << " p95_abs_jerk=" << fmt(report.jerk[j].p95_abs) << "\n";
    }
    mean_jitter /= static_cast<double>(dims);
    mean_jerk /= static_cast<double>(dims);
    std::cout << "mean jitter_rate=" << fmt(mean_jitter)
              << " mean |jerk|=" << fmt(mean_jerk) << " steps=" << report.steps << "\n";
    std::cout << "intervention_rate=n/a (requires human trials)\n";

    if (!report_path.empty()) {
        nlohmann::json j;
        j["steps"] = report.steps;
        j["dt"] = dt;
        j["jitter_rate"] = report.jitter_rate;
        nlohmann::json jerk_arr = nlohmann::json::array();
        for (const JerkStats& s : report.jerk) {
            jerk_arr.push_back({{"mean_abs", s.mean_abs},
                                {"p95_abs", s.p95_abs},
                                {"samples", s.samples}});
        }
        j["jerk"] = jerk_arr;
        j["intervention_rate"] = "n/a";
        j["seed"] = cfg.seed;
        j["config_hash"] = cfg.config_hash();
        std::ofstream out(report_path);
        if (!out) throw IoError("cannot write " + report_path);
        out << j.dump(2) << "\n";
    }
    print_stanza(cfg);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"saivla: dual-frequency categorical control runtime and simulator"};
    app.require_subcommand(0, 1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run the fixed-ratio scheduler");
    CommonOpts sim_opts;
    sim_opts.attach(sim);
    std::size_t sim_chunks = 100;
    std::string sim_sweep, sim_trace;
    double sim_flops_brain = 100.0, sim_flops_fwd = 5.0, sim_flops_step = 0.25;
    double sim_success = 0.9;
    sim->add_option("--chunks", sim_chunks, "chunks to simulate");
    sim->add_option("--sweep", sim_sweep, "sweep brain intervals, e.g. n=3,5,10");
    sim->add_option("--trace", sim_trace, "write the event trace / sweep table here");
    sim->add_option("--flops-brain-once", sim_flops_brain, "FLOPs per brain call");
    sim->add_option("--flops-cere-per-fwd", sim_flops_fwd, "FLOPs per forward");
    sim->add_option("--flops-cere-per-step", sim_flops_step, "FLOPs per step");
    sim->add_option("--success", sim_success, "success rate for sr_cn");

    // decode
    auto* dec = app.add_subcommand("decode", "hysteresis/EMA decode a probability stream");
    CommonOpts dec_opts;
    dec_opts.attach(dec);
    std::string dec_in, dec_out = "decode_trace.txt";
    dec->add_option("--input", dec_in, "probability stream file")->required();
    dec->add_option("--output", dec_out, "decode trace output");

    // label
    auto* lab = app.add_subcommand("label", "quantize a demonstration trajectory");
    CommonOpts lab_opts;
    lab_opts.attach(lab);
    std::string lab_in, lab_out = "labels.svc";
    double lab_deadband = 0.0;
    std::size_t lab_window = 0;
    std::int64_t lab_timestamp = 0;
    lab->add_option("--input", lab_in, "trajectory file (svc-traj v1)")->required();
    lab->add_option("--output", lab_out, "labeled archive output");
    lab->add_option("--deadband", lab_deadband, "uniform deadband");
    lab->add_option("--smooth-window", lab_window, "odd majority window (0 = off)");
    lab->add_option("--timestamp", lab_timestamp, "archive timestamp (UTC seconds)");

    // cache validate
    auto* cache = app.add_subcommand("cache", "archive utilities");
    auto* cval = cache->add_subcommand("validate", "validate an archive");
    CommonOpts cval_opts;
    cval_opts.attach(cval);
    std::string cval_path, cval_expect;
    cval->add_option("path", cval_path, "archive path")->required();
    cval->add_option("--expect-version-hash", cval_expect, "required version hash");

    // bench
    auto* bench = app.add_subcommand("bench", "timing protocol rehearsal");
    CommonOpts bench_opts;
    bench_opts.attach(bench);
    std::string bench_workload = "sleep", bench_report;
    double bench_sleep = 10.0;
    std::size_t bench_repeats = 15, bench_warmup = 3;
    bench->add_option("--workload", bench_workload, "sleep|paracat");
    bench->add_option("--sleep-ms", bench_sleep, "sleep duration for the sleep workload");
    bench->add_option("--repeats", bench_repeats, "timed repeats (>= 11)");
    bench->add_option("--warmup", bench_warmup, "uncounted warmup runs (>= 3)");
    bench->add_option("--report", bench_report, "write the JSON report here");

    // train-toy
    auto* toy = app.add_subcommand("train-toy", "train the head on the synthetic copy task");
    CommonOpts toy_opts;
    toy_opts.attach(toy);
    std::size_t toy_depth = 2, toy_dmodel = 64, toy_heads = 4;
    std::size_t toy_steps = 2000, toy_batch = 32;
    double toy_lr = 1e-4;
    std::string toy_params, toy_report;
    std::int64_t toy_timestamp = 0;
    toy->add_option("--depth", toy_depth, "transformer blocks");
    toy->add_option("--d-model", toy_dmodel, "model width");
    toy->add_option("--heads", toy_heads, "attention heads");
    toy->add_option("--steps", toy_steps, "training steps");
    toy->add_option("--batch", toy_batch, "batch size");
    toy->add_option("--lr", toy_lr, "learning rate");
    toy->add_option("--out-params", toy_params, "write trained params archive here");
    toy->add_option("--report", toy_report, "write the JSON report here");
    toy->add_option("--timestamp", toy_timestamp, "params archive timestamp");

    // metrics
    auto* met = app.add_subcommand("metrics", "stability metrics from a decode trace");
    CommonOpts met_opts;
    met_opts.attach(met);
    std::string met_in, met_report;
    met->add_option("--input", met_in, "decode trace file")->required();
    met->add_option("--report", met_report, "write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (app.get_subcommands().empty() || (cache->parsed() && !cval->parsed())) {
        std::cerr << app.help() << "\n";
        return kExitUsage;
    }

    try {
        if (sim->parsed()) {
            return cmd_simulate(sim_opts.resolve(), sim_chunks, sim_sweep, sim_trace,
                                sim_flops_brain, sim_flops_fwd, sim_flops_step,
                                sim_success);
        }
        if (dec->parsed()) return cmd_decode(dec_opts.resolve(), dec_in, dec_out);
        if (lab->parsed()) {
            return cmd_label(lab_opts.resolve(), lab_in, lab_out, lab_deadband,
                             lab_window, lab_timestamp);
        }
        if (cval->parsed()) {
            return cmd_cache_validate(cval_opts.resolve(), cval_path, cval_expect);
        }
        if (bench->parsed()) {
            return cmd_bench(bench_opts.resolve(), bench_workload, bench_sleep,
                             bench_repeats, bench_warmup, bench_report);
        }
        if (toy->parsed()) {
            return cmd_train_toy(toy_opts.resolve(), toy_depth, toy_dmodel, toy_heads,
                                 toy_steps, toy_batch, toy_lr, toy_params, toy_report,
                                 toy_timestamp);
        }
        if (met->parsed()) return cmd_metrics(met_opts.resolve(), met_in, met_report);
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const InsufficientData& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const InvalidPrompt& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }

    std::cerr << app.help() << "\n";
    return kExitUsage;
}
