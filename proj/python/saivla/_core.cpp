// Python bindings for the main operations: numerics, decoding, scheduling,
// labeling, ROI geometry, archives, prompts, metrics, and the toy head.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <random>

#include "saivla/cache.hpp"
#include "saivla/errors.hpp"
#include "saivla/decoder.hpp"
#include "saivla/labeling.hpp"
#include "saivla/metrics.hpp"
#include "saivla/numerics.hpp"
#include "saivla/paracat.hpp"
#include "saivla/prompt.hpp"
#include "saivla/roi.hpp"
#include "saivla/run_config.hpp"
#include "saivla/scheduler.hpp"
#include "saivla/train.hpp"

namespace py = pybind11;
using namespace saivla;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return Matrix(0, 0);
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols) {
            throw InvalidArgument("ragged row list cannot form a matrix");
        }
        std::copy(rows[i].begin(), rows[i].end(), m.row(i));
    }
    return m;
}

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
    std::vector<std::vector<double>> out(m.rows, std::vector<double>(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i) {
        std::copy(m.row(i), m.row(i) + m.cols, out[i].begin());
    }
    return out;
}

ProbVector3 prob_from_triple(const std::array<double, 3>& p) {
    return make_prob3(p[0], p[1], p[2]);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "saivla: dual-frequency categorical control runtime";
    m.attr("__version__") = kVersion;

    py::register_exception<InvalidArgument>(m, "InvalidArgumentError",
                                            PyExc_ValueError);
    py::register_exception<InsufficientData>(m, "InsufficientDataError",
                                             PyExc_ValueError);
    py::register_exception<BehindCamera>(m, "BehindCameraError", PyExc_ValueError);
    py::register_exception<CacheError>(m, "CacheError", PyExc_RuntimeError);
    py::register_exception<InvalidPrompt>(m, "InvalidPromptError", PyExc_ValueError);

    // numerics
    m.def("softmax_temp", &softmax_temp, py::arg("logits"), py::arg("tau") = 1.0);
    m.def("entropy",
          py::overload_cast<const std::vector<double>&>(&entropy),
          py::arg("p"));
    m.def("kl_div",
          py::overload_cast<const std::vector<double>&, const std::vector<double>&>(
              &kl_div),
          py::arg("p"), py::arg("q"));
    m.def("layer_norm", &layer_norm, py::arg("x"), py::arg("gamma"), py::arg("beta"),
          py::arg("eps") = 1e-5);

    // decoder
    py::class_<TemperatureSchedule>(m, "TemperatureSchedule")
        .def(py::init<>())
        .def_readwrite("start", &TemperatureSchedule::start)
        .def_readwrite("end", &TemperatureSchedule::end)
        .def_readwrite("horizon", &TemperatureSchedule::horizon);
    py::class_<DecoderConfig>(m, "DecoderConfig")
        .def(py::init([](std::size_t dims, double step) {
                 return DecoderConfig::defaults(dims, step);
             }),
             py::arg("dims"), py::arg("step") = 5.0)
        .def_readwrite("theta_up", &DecoderConfig::theta_up)
        .def_readwrite("theta_down", &DecoderConfig::theta_down)
        .def_readwrite("alpha", &DecoderConfig::alpha)
        .def_readwrite("step_sizes", &DecoderConfig::step_sizes)
        .def_readwrite("temperature", &DecoderConfig::temperature)
        .def_readwrite("entropy_cap", &DecoderConfig::entropy_cap);
    py::class_<DecoderState>(m, "DecoderState")
        .def_static("initial", &DecoderState::initial, py::arg("dims"))
        .def_readwrite("prev_decisions", &DecoderState::prev_decisions)
        .def_readwrite("ema", &DecoderState::ema)
        .def_readonly("step", &DecoderState::step);
    m.def(
        "decode_step",
        [](const std::vector<std::array<double, 3>>& probs, DecoderState& state,
           const DecoderConfig& cfg) {
            std::vector<ProbVector3> p;
            p.reserve(probs.size());
            for (const auto& triple : probs) p.push_back(prob_from_triple(triple));
            const auto decisions = decode_step(p, state, cfg);
            return std::vector<int>(decisions.begin(), decisions.end());
        },
        py::arg("probs"), py::arg("state"), py::arg("config"));
    m.def(
        "ema_update",
        [](DecoderState& state, const std::vector<int>& decisions,
           const DecoderConfig& cfg) {
            std::vector<Ternary> d;
            d.reserve(decisions.size());
            for (int v : decisions) d.push_back(static_cast<Ternary>(v));
            return ema_update(state, d, cfg);
        },
        py::arg("state"), py::arg("decisions"), py::arg("config"));
    m.def("anneal_temperature", &anneal_temperature, py::arg("step"), py::arg("config"));
    m.def("conservative_mode", &conservative_mode, py::arg("roi_confident"),
          py::arg("mean_entropy"), py::arg("config"));

    // scheduler
    py::class_<ScheduleConfig>(m, "ScheduleConfig")
        .def(py::init<>())
        .def_readwrite("brain_interval", &ScheduleConfig::brain_interval)
        .def_readwrite("chunk_steps", &ScheduleConfig::chunk_steps)
        .def_readwrite("f_fwd", &ScheduleConfig::f_fwd)
        .def_readwrite("flops_brain_once", &ScheduleConfig::flops_brain_once)
        .def_readwrite("flops_cere_per_fwd", &ScheduleConfig::flops_cere_per_fwd)
        .def_readwrite("flops_cere_per_step", &ScheduleConfig::flops_cere_per_step);
    py::enum_<BudgetMode>(m, "BudgetMode")
        .value("PER_STEP", BudgetMode::PerStep)
        .value("PER_FORWARD", BudgetMode::PerForward);
    m.def(
        "simulate",
        [](const ScheduleConfig& cfg, std::size_t chunks, std::uint64_t seed) {
            const ScheduleTrace trace = simulate(cfg, chunks, seed);
            py::dict summary;
            summary["chunks"] = trace.summary.chunks;
            summary["brain_calls"] = trace.summary.brain_calls;
            summary["steps"] = trace.summary.steps;
            summary["duration_s"] = trace.summary.duration_s;
            summary["f_fwd_achieved"] = trace.summary.f_fwd_achieved;
            summary["f_eff"] = trace.summary.f_eff;
            summary["mean_brain_latency_ms"] = trace.summary.mean_brain_latency_ms;
            summary["mean_cere_latency_ms"] = trace.summary.mean_cere_latency_ms;
            py::list events;
            for (const ScheduleEvent& e : trace.events) {
                py::dict ev;
                ev["t"] = e.t;
                ev["kind"] = event_kind_name(e.kind);
                ev["chunk"] = e.chunk;
                ev["step"] = e.step;
                ev["latency_ms"] = e.latency_ms;
                events.append(ev);
            }
            py::dict out;
            out["summary"] = summary;
            out["events"] = events;
            return out;
        },
        py::arg("config"), py::arg("chunks"), py::arg("seed") = 0);
    m.def("compute_budget", &compute_budget, py::arg("config"),
          py::arg("mode") = BudgetMode::PerForward);
    m.def("sr_cn", &sr_cn, py::arg("success_rate"), py::arg("c_budget"));

    // labeling
    py::class_<ControlGrid>(m, "ControlGrid")
        .def_static("dual_arm_default", &ControlGrid::dual_arm_default,
                    py::arg("delta_p_mm") = 5.0, py::arg("delta_theta_deg") = 1.0)
        .def_static("uniform",
                    [](std::size_t dims, double step) {
                        return ControlGrid::uniform(dims, step);
                    },
                    py::arg("dims"), py::arg("step"))
        .def_readwrite("step_sizes", &ControlGrid::step_sizes)
        .def_readwrite("deadbands", &ControlGrid::deadbands);
    m.def(
        "quantize_deltas",
        [](const std::vector<std::vector<double>>& deltas, const ControlGrid& grid) {
            const auto labels = quantize_deltas(deltas, grid);
            std::vector<std::vector<int>> out(labels.size());
            for (std::size_t t = 0; t < labels.size(); ++t) {
                out[t].assign(labels[t].begin(), labels[t].end());
            }
            return out;
        },
        py::arg("deltas"), py::arg("grid"));
    m.def("calibrate_deadband", &calibrate_deadband, py::arg("noise_samples"),
          py::arg("grid"));
    m.def("outlier_weights", &outlier_weights, py::arg("deltas"), py::arg("timestamps"));

    // roi
    py::class_<CameraCalib>(m, "CameraCalib")
        .def_static("identity",
                    [](double fx, double fy, double cx, double cy, std::size_t width,
                       std::size_t height) {
                        return CameraCalib::identity(fx, fy, cx, cy,
                                                     ImageDims{width, height});
                    },
                    py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"),
                    py::arg("width") = 1028, py::arg("height") = 800)
        .def_static("load", &CameraCalib::load, py::arg("path"))
        .def("save", &CameraCalib::save, py::arg("path"))
        .def("validate", &CameraCalib::validate);
    m.def(
        "project_point",
        [](const std::array<double, 3>& p, const CameraCalib& calib) {
            const Projection proj = project_point(p, calib);
            return py::make_tuple(proj.u, proj.v, proj.z);
        },
        py::arg("p_world"), py::arg("calib"));
    m.def(
        "roi_rect",
        [](double u, double v, std::size_t crop, std::size_t width, std::size_t height) {
            const Rect r = roi_rect(u, v, crop, ImageDims{width, height});
            return py::make_tuple(r.x0, r.y0, r.x1, r.y1);
        },
        py::arg("center_u"), py::arg("center_v"), py::arg("crop") = 256,
        py::arg("width") = 1028, py::arg("height") = 800);

    // cache + prompts
    m.def(
        "write_archive",
        [](const py::dict& manifest, const py::dict& tensors, const std::string& path) {
            CacheManifest m2;
            m2.version_hash = manifest.contains("version_hash")
                                  ? manifest["version_hash"].cast<std::string>()
                                  : "";
            m2.dataset_id = manifest.contains("dataset_id")
                                ? manifest["dataset_id"].cast<std::string>()
                                : "";
            m2.task_id =
                manifest.contains("task_id") ? manifest["task_id"].cast<std::string>() : "";
            m2.big_brain_id = manifest.contains("big_brain_id")
                                  ? manifest["big_brain_id"].cast<std::string>()
                                  : "";
            m2.tokenizer_id = manifest.contains("tokenizer_id")
                                  ? manifest["tokenizer_id"].cast<std::string>()
                                  : "";
            m2.prompt_id = manifest.contains("prompt_id")
                               ? manifest["prompt_id"].cast<std::string>()
                               : "";
            m2.prompt_hash = manifest.contains("prompt_hash")
                                 ? manifest["prompt_hash"].cast<std::string>()
                                 : "";
            if (manifest.contains("layers")) {
                m2.layers = manifest["layers"].cast<std::vector<std::string>>();
            }
            if (manifest.contains("timestamp_utc")) {
                m2.timestamp_utc = manifest["timestamp_utc"].cast<std::int64_t>();
            }
            std::vector<NamedTensor> named;
            for (const auto& item : tensors) {
                NamedTensor t;
                t.name = item.first.cast<std::string>();
                t.values = matrix_from_rows(
                    item.second.cast<std::vector<std::vector<double>>>());
                t.dtype = Dtype::F32;
                named.push_back(std::move(t));
            }
            write_archive(m2, named, path);
        },
        py::arg("manifest"), py::arg("tensors"), py::arg("path"));
    m.def(
        "read_tensor",
        [](const std::string& path, const std::string& name, bool mapped) {
            ArchiveReader reader = ArchiveReader::open(
                path, mapped ? ReadMode::Mapped : ReadMode::Eager);
            return matrix_to_rows(reader.tensor(name).to_matrix());
        },
        py::arg("path"), py::arg("name"), py::arg("mapped") = false);
    m.def(
        "validate_archive",
        [](const std::string& path, const std::optional<std::string>& expected) {
            const ValidationReport report = validate_archive(path, expected);
            py::list checks;
            for (const ValidationCheck& c : report.checks) {
                py::dict d;
                d["name"] = c.name;
                d["pass"] = c.pass;
                d["detail"] = c.detail;
                checks.append(d);
            }
            py::dict out;
            out["checks"] = checks;
            out["all_pass"] = report.all_pass();
            return out;
        },
        py::arg("path"), py::arg("expected_version_hash") = py::none());
    m.def(
        "shuffle_prompt_fields",
        [](const std::string& prompt_json, double p, std::uint64_t seed) {
            const PromptDocument doc = parse_prompt_json(prompt_json);
            const ShuffledPrompt out = shuffle_prompt_fields(doc, p, seed);
            py::dict d;
            d["json"] = out.render_json();
            d["prompt_hash"] = out.prompt_hash;
            d["shuffled"] = out.shuffled;
            return d;
        },
        py::arg("prompt_json"), py::arg("p") = 0.5, py::arg("seed") = 0);

    // metrics
    m.def(
        "jitter_rate",
        [](const std::vector<std::vector<int>>& decisions) {
            std::vector<std::vector<Ternary>> d(decisions.size());
            for (std::size_t t = 0; t < decisions.size(); ++t) {
                d[t].assign(decisions[t].begin(), decisions[t].end());
            }
            return jitter_rate(d);
        },
        py::arg("decisions"));
    m.def(
        "jerk",
        [](const std::vector<std::vector<double>>& commands, double dt) {
            const auto stats = jerk(commands, dt);
            py::list out;
            for (const JerkStats& s : stats) {
                py::dict d;
                d["mean_abs"] = s.mean_abs;
                d["p95_abs"] = s.p95_abs;
                d["samples"] = s.samples;
                out.append(d);
            }
            return out;
        },
        py::arg("commands"), py::arg("dt"));

    // paracat + training
    py::class_<HeadConfig>(m, "HeadConfig")
        .def(py::init<>())
        .def_readwrite("depth", &HeadConfig::depth)
        .def_readwrite("d_model", &HeadConfig::d_model)
        .def_readwrite("heads", &HeadConfig::heads)
        .def_readwrite("chunk_steps", &HeadConfig::chunk_steps)
        .def_readwrite("action_dims", &HeadConfig::action_dims)
        .def_readwrite("max_image_tokens", &HeadConfig::max_image_tokens)
        .def_readwrite("max_text_tokens", &HeadConfig::max_text_tokens);
    py::class_<HeadParams>(m, "HeadParams")
        .def_static("random", &HeadParams::random, py::arg("config"), py::arg("seed"),
                    py::arg("init_std") = 0.02)
        .def("parameter_count", &HeadParams::parameter_count);
    m.def(
        "paracat_forward",
        [](const std::vector<std::vector<double>>& context,
           const std::vector<std::vector<double>>& image,
           const std::vector<std::vector<double>>& text,
           const std::vector<double>& state, const HeadParams& params,
           const HeadConfig& cfg) {
            TokenBundle bundle;
            bundle.context = matrix_from_rows(context);
            bundle.image = matrix_from_rows(image);
            bundle.text = matrix_from_rows(text);
            bundle.state = Matrix(1, state.size());
            std::copy(state.begin(), state.end(), bundle.state.row(0));
            const ActionChunk chunk = paracat_forward(bundle, params, cfg);
            py::dict out;
            out["logits"] = matrix_to_rows(chunk.logits);
            py::list probs;
            for (const ProbVector3& p : chunk.probs) {
                probs.append(py::make_tuple(p.p_minus, p.p_zero, p.p_plus));
            }
            out["probs"] = probs;
            return out;
        },
        py::arg("context"), py::arg("image"), py::arg("text"), py::arg("state"),
        py::arg("params"), py::arg("config"));
    m.def(
        "train_toy",
        [](const HeadConfig& cfg, std::size_t steps, std::size_t batch, double lr,
           std::uint64_t seed) {
            ToyTaskSpec task;
            task.steps = steps;
            task.batch = batch;
            task.optimizer.lr = lr;
            task.seed = seed;
            const ToyTrainResult result = train_toy(task, cfg);
            py::dict out;
            out["mean_accuracy"] = result.mean_accuracy;
            out["min_dim_accuracy"] = result.min_dim_accuracy;
            out["dim_accuracy"] = result.dim_accuracy;
            out["final_loss"] = result.final_loss;
            out["steps_run"] = result.steps_run;
            return out;
        },
        py::arg("config"), py::arg("steps") = 200, py::arg("batch") = 16,
        py::arg("lr") = 1e-4, py::arg("seed") = 0);
    m.def(
        "grad_check",
        [](const HeadConfig& cfg, std::uint64_t seed, double h,
           std::size_t sample_coords) {
            const HeadParams params = HeadParams::random(cfg, seed, 0.3);
            std::mt19937_64 rng(seed + 1);
            std::uniform_real_distribution<double> dist(-0.5, 0.5);
            TokenBundle bundle;
            bundle.context = Matrix(2, cfg.d_model);
            bundle.image = Matrix(2, cfg.d_model);
            bundle.text = Matrix(2, cfg.d_model);
            bundle.state = Matrix(1, cfg.d_model);
            for (Matrix* mm :
                 {&bundle.context, &bundle.image, &bundle.text, &bundle.state}) {
                for (double& v : mm->data) v = dist(rng);
            }
            std::uniform_int_distribution<int> coin(-1, 1);
            std::vector<std::vector<Ternary>> labels(
                cfg.chunk_steps, std::vector<Ternary>(cfg.action_dims));
            for (auto& row : labels)
                for (auto& v : row) v = static_cast<Ternary>(coin(rng));
            LossWeights lw;
            lw.label_smoothing = 0.05;
            lw.lambda_entropy = 3e-3;
            lw.lambda_temporal = 3e-3;
            return grad_check(params, cfg, bundle, labels, lw, h, sample_coords,
                              seed + 2);
        },
        py::arg("config"), py::arg("seed") = 0, py::arg("h") = 1e-5,
        py::arg("sample_coords") = 200);
}
