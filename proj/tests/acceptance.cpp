// Acceptance suite: one named criterion per function, one PASS/FAIL line
// each. Run with no arguments for the full gate or with a criterion name.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "paracat_oracle.hpp"
#include "saivla/cache.hpp"
#include "saivla/decoder.hpp"
#include "saivla/labeling.hpp"
#include "saivla/metrics.hpp"
#include "saivla/numerics.hpp"
#include "saivla/paracat.hpp"
#include "saivla/prompt.hpp"
#include "saivla/roi.hpp"
#include "saivla/scheduler.hpp"
#include "saivla/train.hpp"

using namespace saivla;

namespace {

struct Gate {
    bool ok = true;
    std::string first_failure;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            first_failure = what;
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path tmp(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

// ------------------------------------------------------------------------
// Scheduler arithmetic: defaults N=5, K=20, f_fwd=2 over >=100 chunks.
bool scheduler_arithmetic() {
    Gate g;
    const auto t0 = std::chrono::steady_clock::now();

    ScheduleConfig cfg;
    cfg.brain_interval = 5;
    cfg.chunk_steps = 20;
    cfg.f_fwd = 2.0;
    cfg.flops_brain_once = 100.0;
    cfg.flops_cere_per_fwd = 5.0;
    cfg.flops_cere_per_step = 0.25;

    for (std::size_t chunks : {100, 101, 137, 250}) {
        const ScheduleTrace trace = simulate(cfg, chunks, 1);
        g.expect(std::abs(trace.summary.f_eff - 40.0) / 40.0 <= 0.01,
                 "f_eff within 1% of 40 Hz");
        const std::size_t want_calls = (chunks + 4) / 5;
        g.expect(trace.summary.brain_calls == want_calls, "brain calls == ceil(chunks/5)");
        g.expect(trace.summary.steps == chunks * 20, "steps == chunks*K");
    }

    // closed forms to 1e-9 relative
    const double per_fwd = compute_budget(cfg, BudgetMode::PerForward);
    const double want_fwd = 100.0 / 5.0 + 2.0 * 5.0;
    g.expect(std::abs(per_fwd - want_fwd) / want_fwd <= 1e-9, "per-forward budget");
    const double per_step = compute_budget(cfg, BudgetMode::PerStep);
    const double want_step = 100.0 / 5.0 + (20.0 * 2.0) * 0.25;
    g.expect(std::abs(per_step - want_step) / want_step <= 1e-9, "per-step budget");

    for (double success : {0.0, 0.5, 0.9, 1.0}) {
        g.expect(sr_cn(success, per_fwd) == success / per_fwd, "sr_cn exact ratio");
    }

    g.expect(seconds_since(t0) < 1.0, "runtime < 1 s");
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// A5-style sweep through the real CLI: monotone budget, constant f_eff,
// byte-deterministic emission.
bool a5_sweep() {
    Gate g;
    const auto table_a = tmp("saivla_sweep_a.txt");
    const auto table_b = tmp("saivla_sweep_b.txt");
    const std::string base = std::string(SAIVLA_CLI_PATH) +
                             " simulate --sweep n=3,5,10 --chunks 100 --seed 11 --trace ";
    const int rc_a = std::system((base + table_a.string() + " >/dev/null").c_str());
    const int rc_b = std::system((base + table_b.string() + " >/dev/null").c_str());
    g.expect(WEXITSTATUS(rc_a) == 0 && WEXITSTATUS(rc_b) == 0, "sweep exits cleanly");

    std::ifstream in_a(table_a), in_b(table_b);
    std::stringstream sa, sb;
    sa << in_a.rdbuf();
    sb << in_b.rdbuf();
    g.expect(!sa.str().empty() && sa.str() == sb.str(),
             "sweep table byte-identical across reruns");

    // parse: skip comments and the column header
    std::istringstream table(sa.str());
    std::string line;
    std::vector<double> budgets, f_effs;
    while (std::getline(table, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("n\t", 0) == 0) continue;
        std::istringstream row(line);
        double n, budget, f_fwd, f_eff;
        row >> n >> budget >> f_fwd >> f_eff;
        budgets.push_back(budget);
        f_effs.push_back(f_eff);
    }
    g.expect(budgets.size() == 3, "three sweep rows");
    for (std::size_t i = 1; i < budgets.size(); ++i) {
        g.expect(budgets[i] < budgets[i - 1], "C_budget strictly decreasing in N");
        g.expect(f_effs[i] == f_effs[0], "f_eff constant across the sweep");
    }
    std::filesystem::remove(table_a);
    std::filesystem::remove(table_b);
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// Fixed-seed boundary-noise streams: hysteresis+EMA strictly beat argmax
// with raw delta commands, for sigma in {0.1, 0.3, 0.5}.
bool decoder_stability() {
    Gate g;
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t steps = 2000;
    const std::size_t dims = 4;
    const double dt = 1.0 / 40.0;

    for (double sigma : {0.1, 0.3, 0.5}) {
        std::mt19937_64 rng(2024);
        std::normal_distribution<double> noise(0.0, sigma);

        DecoderConfig cfg = DecoderConfig::defaults(dims, 5.0);  // theta 0.2, alpha 0.8
        DecoderState state = DecoderState::initial(dims);

        std::vector<std::vector<Ternary>> hyst_d, raw_d;
        std::vector<std::vector<double>> hyst_u, raw_u;
        for (std::size_t t = 0; t < steps; ++t) {
            std::vector<ProbVector3> probs(dims);
            std::vector<Ternary> argmax(dims);
            std::vector<double> raw_cmd(dims);
            for (std::size_t j = 0; j < dims; ++j) {
                // logits around the 0/+1 boundary
                probs[j] = softmax_temp3({-2.0, 0.0, noise(rng)}, 1.0);
                const ProbVector3& p = probs[j];
                argmax[j] = p.p_plus >= p.p_zero && p.p_plus >= p.p_minus  ? Ternary{1}
                            : p.p_minus >= p.p_zero && p.p_minus > p.p_plus ? Ternary{-1}
                                                                            : Ternary{0};
                raw_cmd[j] = static_cast<double>(argmax[j]) * cfg.step_sizes[j];
            }
            const auto d = decode_step(probs, state, cfg);
            hyst_d.push_back(d);
            hyst_u.push_back(ema_update(state, d, cfg));
            raw_d.push_back(argmax);
            raw_u.push_back(raw_cmd);
        }

        double hyst_jitter = 0.0, raw_jitter = 0.0, hyst_jerk = 0.0, raw_jerk = 0.0;
        const auto hj = jitter_rate(hyst_d);
        const auto rj = jitter_rate(raw_d);
        const auto hk = jerk(hyst_u, dt);
        const auto rk = jerk(raw_u, dt);
        for (std::size_t j = 0; j < dims; ++j) {
            hyst_jitter += hj[j];
            raw_jitter += rj[j];
            hyst_jerk += hk[j].mean_abs;
            raw_jerk += rk[j].mean_abs;
        }
        g.expect(hyst_jitter < raw_jitter, "hysteresis jitter strictly lower");
        g.expect(hyst_jerk < raw_jerk, "EMA mean |jerk| strictly lower");
    }
    g.expect(seconds_since(t0) < 5.0, "runtime < 5 s");
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// The three worked hysteresis/EMA contracts at 1e-9.
bool hysteresis_ema_contracts() {
    Gate g;

    DecoderConfig cfg = DecoderConfig::defaults(1, 5.0);
    {
        DecoderState s = DecoderState::initial(1);
        s.prev_decisions[0] = -1;
        const auto d = decode_step({make_prob3(0.34, 0.33, 0.33)}, s, cfg);
        g.expect(d[0] == -1, "hold case keeps the previous decision");
    }
    {
        DecoderState s = DecoderState::initial(1);
        const auto d = decode_step({make_prob3(0.1, 0.3, 0.6)}, s, cfg);
        g.expect(d[0] == +1, "+1 margin case switches");
        const auto u = ema_update(s, d, cfg);
        g.expect(std::abs(u[0] - 1.0) <= 1e-9, "first EMA step is (1-alpha)*delta");
    }
    {
        DecoderState s = DecoderState::initial(1);
        for (int t = 0; t < 20; ++t) ema_update(s, {Ternary{1}}, cfg);
        const double gap = std::abs(s.ema[0] - 5.0);
        const double want = std::pow(0.8, 20) * 5.0;
        g.expect(std::abs(gap - want) <= 1e-9, "|u - delta| == alpha^20 * delta");
    }
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// Gradient check, forward oracle, and loss scalar oracles.
bool paracat_correctness() {
    Gate g;
    const auto t0 = std::chrono::steady_clock::now();

    // gradient check at float64, h = 1e-5, on a small two-block config
    {
        HeadConfig cfg;
        cfg.depth = 2;
        cfg.d_model = 32;
        cfg.heads = 4;
        cfg.chunk_steps = 3;
        cfg.action_dims = 2;
        cfg.max_image_tokens = 4;
        cfg.max_text_tokens = 2;
        const HeadParams params = HeadParams::random(cfg, 31, 0.3);
        std::mt19937_64 rng(32);
        std::uniform_real_distribution<double> dist(-0.5, 0.5);
        TokenBundle bundle;
        bundle.context = Matrix(2, 32);
        bundle.image = Matrix(4, 32);
        bundle.text = Matrix(2, 32);
        bundle.state = Matrix(1, 32);
        for (Matrix* m : {&bundle.context, &bundle.image, &bundle.text, &bundle.state}) {
            for (double& v : m->data) v = dist(rng);
        }
        std::uniform_int_distribution<int> coin(-1, 1);
        std::vector<std::vector<Ternary>> labels(3, std::vector<Ternary>(2));
        for (auto& row : labels)
            for (auto& v : row) v = static_cast<Ternary>(coin(rng));

        LossWeights lw;
        lw.label_smoothing = 0.05;
        lw.lambda_entropy = 3e-3;
        lw.lambda_temporal = 3e-3;
        const double err = grad_check(params, cfg, bundle, labels, lw, 1e-5, 256, 33);
        g.expect(err < 1e-4, "grad check max relative error < 1e-4");
    }

    // forward matches the hand-rolled single-block oracle at 1e-9
    {
        HeadConfig cfg;
        cfg.depth = 1;
        cfg.d_model = 16;
        cfg.heads = 1;
        cfg.chunk_steps = 4;
        cfg.action_dims = 3;
        cfg.max_image_tokens = 4;
        cfg.max_text_tokens = 2;
        const HeadParams params = HeadParams::random(cfg, 34, 0.3);
        std::mt19937_64 rng(35);
        std::uniform_real_distribution<double> dist(-0.5, 0.5);
        TokenBundle bundle;
        bundle.context = Matrix(3, 16);
        bundle.image = Matrix(4, 16);
        bundle.text = Matrix(2, 16);
        bundle.state = Matrix(1, 16);
        for (Matrix* m : {&bundle.context, &bundle.image, &bundle.text, &bundle.state}) {
            for (double& v : m->data) v = dist(rng);
        }
        const ActionChunk chunk = paracat_forward(bundle, params, cfg);
        const auto want = paracat_oracle::forward_logits(bundle, params, cfg);
        double max_abs = 0.0;
        for (std::size_t q = 0; q < cfg.query_count(); ++q) {
            for (std::size_t c = 0; c < 3; ++c) {
                max_abs = std::max(max_abs, std::abs(chunk.logits(q, c) - want[q][c]));
            }
        }
        g.expect(max_abs <= 1e-9, "forward vs single-block oracle at 1e-9");
    }

    // loss oracles: uniform case exact, smoothed CE scalar expansion
    {
        HeadConfig cfg;
        cfg.depth = 1;
        cfg.d_model = 8;
        cfg.heads = 1;
        cfg.chunk_steps = 5;
        cfg.action_dims = 4;
        cfg.max_image_tokens = 2;
        cfg.max_text_tokens = 2;
        HeadParams params = HeadParams::random(cfg, 36);
        visit_param_buffers(params, [](std::vector<double>& b) {
            std::fill(b.begin(), b.end(), 0.0);
        });
        TokenBundle bundle;
        bundle.context = Matrix(1, 8);
        bundle.image = Matrix(2, 8);
        bundle.text = Matrix(1, 8);
        bundle.state = Matrix(1, 8);
        const ActionChunk chunk = paracat_forward(bundle, params, cfg);
        std::vector<std::vector<Ternary>> labels(5, std::vector<Ternary>(4, 1));
        LossWeights lw;
        const LossBreakdown out = paracat_loss(chunk, labels, lw);
        g.expect(std::abs(out.ce - 20.0 * std::log(3.0)) <= 1e-9,
                 "uniform CE == K*D*ln3 at 1e-9");

        ActionChunk cell;
        cell.chunk_steps = 1;
        cell.action_dims = 1;
        cell.logits = Matrix(1, 3);
        cell.probs = {ProbVector3{0.2, 0.3, 0.5}};
        LossWeights smooth;
        smooth.label_smoothing = 0.05;
        const LossBreakdown got = paracat_loss(cell, {{Ternary{1}}}, smooth);
        const double eps3 = 0.05 / 3.0;
        const double want = -(eps3 * std::log(0.2) + eps3 * std::log(0.3) +
                              (0.95 + eps3) * std::log(0.5));
        g.expect(std::abs(got.ce - want) <= 1e-12, "smoothed CE scalar oracle");
    }

    g.expect(seconds_since(t0) < 60.0, "runtime < 60 s");
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// Synthetic copy task: >= 95% per-dimension accuracy in <= 2000 steps.
bool toy_training() {
    Gate g;
    const auto t0 = std::chrono::steady_clock::now();

    HeadConfig cfg;
    cfg.depth = 2;
    cfg.d_model = 64;
    cfg.heads = 4;
    cfg.chunk_steps = 5;
    cfg.action_dims = 4;
    cfg.max_image_tokens = 4;
    cfg.max_text_tokens = 4;

    ToyTaskSpec task;
    task.steps = 2000;
    task.batch = 32;
    task.eval_samples = 300;
    task.seed = 7;

    // determinism probe at small scale first
    {
        ToyTaskSpec probe = task;
        probe.steps = 25;
        probe.batch = 8;
        const ToyTrainResult a = train_toy(probe, cfg);
        const ToyTrainResult b = train_toy(probe, cfg);
        g.expect(a.final_loss == b.final_loss, "bit-identical loss per seed");
    }

    const ToyTrainResult result = train_toy(task, cfg);
    g.expect(result.min_dim_accuracy >= 0.95,
             "per-dimension accuracy >= 0.95 (got min " +
                 std::to_string(result.min_dim_accuracy) + ")");
    const double elapsed = seconds_since(t0);
    g.expect(elapsed < 300.0, "runtime < 5 min");
    std::cerr << "  [toy] min_dim_accuracy=" << result.min_dim_accuracy
              << " mean=" << result.mean_accuracy << " final_loss=" << result.final_loss
              << " elapsed_s=" << elapsed << "\n";
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// Labeling: oracle agreement on 1e5 random deltas, exhaustive boundary
// grid, lossless reassembly.
bool labeling_gate() {
    Gate g;

    ControlGrid grid = ControlGrid::dual_arm_default();
    for (std::size_t j = 0; j < grid.dims(); ++j) grid.deadbands[j] = 0.4;

    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> dist(-12.0, 12.0);
    const std::size_t rows = 100000 / grid.dims() + 1;  // >= 1e5 cells
    std::vector<std::vector<double>> deltas(rows, std::vector<double>(grid.dims()));
    for (auto& row : deltas)
        for (double& v : row) v = dist(rng);
    const auto labels = quantize_deltas(deltas, grid);
    bool all_match = true;
    for (std::size_t t = 0; t < rows; ++t) {
        for (std::size_t j = 0; j < grid.dims(); ++j) {
            const double d = deltas[t][j];
            const int want = d > 0.4 ? 1 : (d < -0.4 ? -1 : 0);
            if (static_cast<int>(labels[t][j]) != want) all_match = false;
        }
    }
    g.expect(all_match, "quantization matches the elementwise oracle on 1e5 deltas");

    // exhaustive boundary-adjacent grid: sign symmetry + deadband monotonicity
    ControlGrid g1 = ControlGrid::uniform(1, 5.0);
    g1.deadbands[0] = 1.0;
    ControlGrid g2 = ControlGrid::uniform(1, 5.0);
    g2.deadbands[0] = 2.0;
    std::vector<double> boundary;
    for (double base : {0.0, 1.0, 2.0, 5.0}) {
        for (double eps : {0.0, 1e-12, 1e-9, 1e-6, 1e-3, 0.5}) {
            boundary.push_back(base + eps);
            boundary.push_back(base - eps);
            boundary.push_back(-(base + eps));
            boundary.push_back(-(base - eps));
        }
    }
    bool symmetric = true, monotone = true;
    for (double v : boundary) {
        const auto plus = quantize_deltas({{v}}, g1)[0][0];
        const auto minus = quantize_deltas({{-v}}, g1)[0][0];
        if (static_cast<int>(minus) != -static_cast<int>(plus)) symmetric = false;
        const auto wide = quantize_deltas({{v}}, g2)[0][0];
        if (wide != plus && wide != 0) monotone = false;
        if (std::abs(wide) > std::abs(plus)) monotone = false;
    }
    g.expect(symmetric, "sign symmetry on the boundary grid");
    g.expect(monotone, "deadband monotonicity on the boundary grid");

    // lossless chunk reassembly across ragged lengths
    std::uniform_int_distribution<int> coin(-1, 1);
    bool lossless = true;
    for (std::size_t T : {1, 5, 19, 20, 21, 45, 99, 100}) {
        std::vector<std::vector<Ternary>> stream(T, std::vector<Ternary>(16));
        for (auto& row : stream)
            for (auto& v : row) v = static_cast<Ternary>(coin(rng));
        const auto back = reassemble_chunks(align_to_grid(stream, 20));
        if (back != stream) lossless = false;
    }
    g.expect(lossless, "chunk reassembly reproduces the stream exactly");

    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// Cache integrity: corruption corpus, pristine corpus, f16 round trip,
// prompt hash permutation invariance.
bool cache_integrity() {
    Gate g;
    const auto t0 = std::chrono::steady_clock::now();

    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);

    const auto make_archive = [&](const std::filesystem::path& path, std::uint64_t seed) {
        std::mt19937_64 local(seed);
        CacheManifest m;
        m.version_hash = "vh-" + std::to_string(seed);
        m.dataset_id = "corpus";
        m.task_id = "integrity";
        m.big_brain_id = "none";
        m.tokenizer_id = "none";
        m.prompt_id = "json";
        m.prompt_hash = "0";
        m.layers = {"early", "mid", "late"};
        m.n_context = 4;
        m.d_model = 8;
        m.k_chunk = 4;
        m.timestamp_utc = 1700000000;
        std::vector<NamedTensor> tensors;
        const std::array<Dtype, 3> dtypes{Dtype::F16, Dtype::F32, Dtype::F64};
        for (int i = 0; i < 3; ++i) {
            Matrix t(4 + (seed + i) % 3, 6);
            for (double& v : t.data) {
                v = dist(local);
            }
            tensors.push_back({"layer" + std::to_string(i), t, dtypes[i]});
        }
        write_archive(m, tensors, path.string());
    };

    // 100 pristine archives -> zero false positives
    std::size_t false_positives = 0;
    const auto pristine = tmp("saivla_pristine.svc");
    for (std::uint64_t i = 0; i < 100; ++i) {
        make_archive(pristine, i);
        if (!validate_archive(pristine.string()).all_pass()) ++false_positives;
    }
    g.expect(false_positives == 0, "pristine corpus has zero false positives");

    // 100 archives with one random bit flip each -> all flagged
    std::size_t caught = 0;
    const auto corrupted = tmp("saivla_corrupted.svc");
    for (std::uint64_t i = 0; i < 100; ++i) {
        make_archive(corrupted, 1000 + i);
        std::ifstream in(corrupted, std::ios::binary);
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        in.close();
        std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
        std::uniform_int_distribution<int> bit(0, 7);
        bytes[pos(rng)] ^= static_cast<std::uint8_t>(1u << bit(rng));
        std::ofstream out(corrupted, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        out.close();
        if (!validate_archive(corrupted.string()).all_pass()) ++caught;
    }
    g.expect(caught == 100, "corruption corpus flagged " + std::to_string(caught) +
                                "/100");

    // byte-exact round trip including f16 payloads
    {
        const auto path_a = tmp("saivla_rt_a.svc");
        const auto path_b = tmp("saivla_rt_b.svc");
        make_archive(path_a, 999);
        ArchiveReader reader = ArchiveReader::open(path_a.string());
        std::vector<NamedTensor> decoded;
        for (const TensorEntry& e : reader.manifest().tensors) {
            const TensorData t = reader.tensor(e.name);
            decoded.push_back({e.name, t.to_matrix(), e.dtype});
        }
        write_archive(reader.manifest(), decoded, path_b.string());
        std::ifstream fa(path_a, std::ios::binary), fb(path_b, std::ios::binary);
        std::stringstream ba, bb;
        ba << fa.rdbuf();
        bb << fb.rdbuf();
        g.expect(ba.str() == bb.str(), "round trip is bit-exact including f16");
        std::filesystem::remove(path_a);
        std::filesystem::remove(path_b);
    }

    // prompt hash across all 120 field orders of the same document
    {
        std::array<std::string, 5> names{"goal", "constraints", "objects",
                                         "failure_cases", "environment"};
        std::array<std::string, 5> values{"grasp the bottle", "stay above the desk",
                                          "white bottle", "tipping", "desk scene"};
        std::array<int, 5> order{0, 1, 2, 3, 4};
        std::string reference;
        std::size_t orders_seen = 0;
        bool all_equal = true;
        do {
            std::string json = "{";
            for (int i = 0; i < 5; ++i) {
                if (i) json += ",";
                json += "\"" + names[order[i]] + "\":\"" + values[order[i]] + "\"";
            }
            json += "}";
            const PromptDocument doc = parse_prompt_json(json);
            const std::string hash = prompt_hash(doc);
            if (reference.empty()) reference = hash;
            if (hash != reference) all_equal = false;
            ++orders_seen;
        } while (std::next_permutation(order.begin(), order.end()));
        g.expect(orders_seen == 120, "visited all 120 permutations");
        g.expect(all_equal, "prompt_hash identical across permutations");
    }

    std::filesystem::remove(pristine);
    std::filesystem::remove(corrupted);
    g.expect(seconds_since(t0) < 10.0, "runtime < 10 s");
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// ROI geometry: oracle agreement on 1e4 poses, rect contract on 1e4
// centers, fallback wired into conservative decoding.
bool roi_geometry() {
    Gate g;
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> angle(-1.4, 1.4);
    std::uniform_real_distribution<double> pos(-0.6, 0.6);
    std::uniform_real_distribution<double> depth(1.0, 5.0);

    const auto rotation = [](double az, double ax) {
        const double cz = std::cos(az), sz = std::sin(az);
        const double cx = std::cos(ax), sx = std::sin(ax);
        std::array<std::array<double, 3>, 3> rz{
            {{cz, -sz, 0.0}, {sz, cz, 0.0}, {0.0, 0.0, 1.0}}};
        std::array<std::array<double, 3>, 3> rx{
            {{1.0, 0.0, 0.0}, {0.0, cx, -sx}, {0.0, sx, cx}}};
        std::array<std::array<double, 3>, 3> out{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) out[i][j] += rx[i][k] * rz[k][j];
        return out;
    };

    double max_err = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        CameraCalib calib = CameraCalib::identity(500, 480, 514, 400);
        calib.extrinsics.rotation = rotation(angle(rng), angle(rng));
        calib.extrinsics.translation = {pos(rng), pos(rng), depth(rng)};
        const std::array<double, 3> p{pos(rng), pos(rng), pos(rng)};
        const auto got = try_project_point(p, calib);
        if (!got) continue;
        const auto want = oracle::project_homogeneous(
            p, calib.extrinsics.rotation, calib.extrinsics.translation, 500, 480, 514,
            400);
        max_err = std::max({max_err, std::abs(got->u - want.u),
                            std::abs(got->v - want.v), std::abs(got->z - want.z)});
    }
    g.expect(max_err <= 1e-9, "projection vs homogeneous oracle at 1e-9");

    const ImageDims dims{1028, 800};
    std::uniform_real_distribution<double> cu(-300.0, 1400.0);
    std::uniform_real_distribution<double> cv(-300.0, 1100.0);
    bool rect_ok = true;
    for (int trial = 0; trial < 10000; ++trial) {
        const Rect r = roi_rect(cu(rng), cv(rng), 256, dims);
        if (r.x1 - r.x0 != 256 || r.y1 - r.y0 != 256) rect_ok = false;
        if (r.x0 < 0 || r.y0 < 0 || r.x1 > 1028 || r.y1 > 800) rect_ok = false;
    }
    g.expect(rect_ok, "every clamped rect is exactly 256x256 and in bounds");

    // behind-camera projection -> fallback -> conservative overrides applied
    {
        const CameraCalib calib = CameraCalib::identity(500, 500, 514, 400);
        const RoiCrop crop = make_roi({0.0, 0.0, -1.0}, RoiSide::Right, calib, 0.0);
        g.expect(crop.fallback, "behind-camera sets the fallback flag");
        DecoderConfig cfg = DecoderConfig::defaults(4);
        const DecoderConfig adjusted = conservative_mode(!crop.fallback, 0.0, cfg);
        g.expect(std::abs(anneal_temperature(0, adjusted) - 2.25) <= 1e-12,
                 "conservative tau override applied");
        g.expect(std::abs(adjusted.theta_up - 0.3) <= 1e-12 &&
                     std::abs(adjusted.theta_down - 0.3) <= 1e-12,
                 "conservative theta override applied");
        g.expect(std::abs(adjusted.alpha - 0.9) <= 1e-12,
                 "conservative alpha override applied");
    }
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

// ------------------------------------------------------------------------
// Timing protocol rehearsal.
bool timing_protocol_gate() {
    Gate g;
    EnvironmentDescriptor env;
    env.device = "cpu";
    env.resolution = "256x256";
    env.batch = 1;
    const TimingReport report = timing_protocol(
        [] { std::this_thread::sleep_for(std::chrono::milliseconds(10)); }, 15, 3, env);
    g.expect(report.median_ms >= 9.0 && report.median_ms <= 15.0,
             "sleep(10ms) median within [9,15] ms (got " +
                 std::to_string(report.median_ms) + ")");
    g.expect(report.environment.device == "cpu" && !report.environment.resolution.empty(),
             "report embeds the environment descriptor");
    g.expect(report.amortization_note.find("amortized") != std::string::npos,
             "report carries the stage-A amortization note");
    g.expect(report.samples_ms.size() == 15, "all repeats recorded");
    if (!g.ok) std::cerr << "  first failure: " << g.first_failure << "\n";
    return g.ok;
}

struct Criterion {
    const char* name;
    std::function<bool()> fn;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {"scheduler-arithmetic", scheduler_arithmetic},
        {"a5-sweep", a5_sweep},
        {"decoder-stability", decoder_stability},
        {"hysteresis-ema-contracts", hysteresis_ema_contracts},
        {"paracat-correctness", paracat_correctness},
        {"toy-training", toy_training},
        {"labeling", labeling_gate},
        {"cache-integrity", cache_integrity},
        {"roi-geometry", roi_geometry},
        {"timing-protocol", timing_protocol_gate},
    };

    std::string only;
    if (argc > 1) only = argv[1];

    bool all_ok = true;
    bool matched = false;
    for (const Criterion& c : criteria) {
        if (!only.empty() && only != c.name) continue;
        matched = true;
        bool ok = false;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            std::cerr << "  exception: " << e.what() << "\n";
        }
        std::cout << (ok ? "PASS " : "FAIL ") << c.name << "\n";
        all_ok = all_ok && ok;
    }
    if (!matched) {
        std::cerr << "unknown criterion '" << only << "'\n";
        return 2;
    }
    return all_ok ? 0 : 1;
}
