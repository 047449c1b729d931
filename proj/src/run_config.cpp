#include "saivla/run_config.hpp"

#include <cstdlib>
#include <ctime>

#include <json.hpp>

#include "saivla/crc32.hpp"
#include "saivla/errors.hpp"

namespace saivla {

void RunConfig::validate() const {
    if (brain_interval < 1) throw InvalidArgument("RunConfig: n must be >= 1");
    if (chunk_steps < 1) throw InvalidArgument("RunConfig: k must be >= 1");
    if (action_dims < 1) throw InvalidArgument("RunConfig: d must be >= 1");
    if (context_tokens < 1) throw InvalidArgument("RunConfig: nc must be >= 1");
    if (!(delta_p_mm > 0.0) || !(delta_theta_deg > 0.0)) {
        throw InvalidArgument("RunConfig: step grids must be positive");
    }
    if (theta < 0.0 || theta >= 1.0) throw InvalidArgument("RunConfig: theta in [0,1)");
    if (alpha < 0.0 || alpha >= 1.0) throw InvalidArgument("RunConfig: alpha in [0,1)");
    if (!(tau_start > 0.0) || !(tau_end > 0.0)) {
        throw InvalidArgument("RunConfig: temperatures must be positive");
    }
    if (!(f_fwd > 0.0)) throw InvalidArgument("RunConfig: f_fwd must be positive");
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["n"] = brain_interval;
    j["k"] = chunk_steps;
    j["d"] = action_dims;
    j["nc"] = context_tokens;
    j["delta_p_mm"] = delta_p_mm;
    j["delta_theta_deg"] = delta_theta_deg;
    j["theta"] = theta;
    j["alpha"] = alpha;
    j["tau_start"] = tau_start;
    j["tau_end"] = tau_end;
    j["tau_horizon"] = tau_horizon;
    j["f_fwd"] = f_fwd;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    return j.dump();
}

std::string RunConfig::config_hash() const { return crc32_hex(to_json()); }

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_string_override(RunConfig& cfg, const std::string& key,
                           const std::string& value) {
    try {
        if (key == "n") cfg.brain_interval = std::stoull(value);
        else if (key == "k") cfg.chunk_steps = std::stoull(value);
        else if (key == "d") cfg.action_dims = std::stoull(value);
        else if (key == "nc") cfg.context_tokens = std::stoull(value);
        else if (key == "delta_p_mm") cfg.delta_p_mm = std::stod(value);
        else if (key == "delta_theta_deg") cfg.delta_theta_deg = std::stod(value);
        else if (key == "theta") cfg.theta = std::stod(value);
        else if (key == "alpha") cfg.alpha = std::stod(value);
        else if (key == "tau_start") cfg.tau_start = std::stod(value);
        else if (key == "tau_end") cfg.tau_end = std::stod(value);
        else if (key == "tau_horizon") cfg.tau_horizon = std::stoull(value);
        else if (key == "f_fwd") cfg.f_fwd = std::stod(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "output_dir") cfg.output_dir = value;
        else throw InvalidArgument("unknown config key '" + key + "'");
    } catch (const std::logic_error&) {
        throw InvalidArgument("bad value '" + value + "' for config key '" + key + "'");
    }
}

}  // namespace

RunConfig merge_run_config(const RunConfig& defaults,
                           const std::optional<std::string>& config_json_text,
                           const std::map<std::string, std::string>& flag_overrides) {
    RunConfig cfg = defaults;

    bool seed_explicit = false;
    if (config_json_text) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(*config_json_text);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("config file is not valid JSON: " +
                                  std::string(e.what()));
        }
        if (!j.is_object()) throw InvalidArgument("config file must be a JSON object");
        take(j, "n", cfg.brain_interval);
        take(j, "k", cfg.chunk_steps);
        take(j, "d", cfg.action_dims);
        take(j, "nc", cfg.context_tokens);
        take(j, "delta_p_mm", cfg.delta_p_mm);
        take(j, "delta_theta_deg", cfg.delta_theta_deg);
        take(j, "theta", cfg.theta);
        take(j, "alpha", cfg.alpha);
        take(j, "tau_start", cfg.tau_start);
        take(j, "tau_end", cfg.tau_end);
        take(j, "tau_horizon", cfg.tau_horizon);
        take(j, "f_fwd", cfg.f_fwd);
        if (j.contains("seed")) {
            cfg.seed = j.at("seed").get<std::uint64_t>();
            seed_explicit = true;
        }
        take(j, "output_dir", cfg.output_dir);
    }

    for (const auto& [key, value] : flag_overrides) {
        apply_string_override(cfg, key, value);
        if (key == "seed") seed_explicit = true;
    }

    if (!seed_explicit) {
        if (const char* env = std::getenv(kSeedEnvVar)) {
            try {
                cfg.seed = std::stoull(env);
            } catch (const std::logic_error&) {
                throw InvalidArgument(std::string(kSeedEnvVar) +
                                      " is not a valid unsigned integer");
            }
        }
    }

    cfg.validate();
    return cfg;
}

std::string repro_stanza(const RunConfig& cfg) {
    char when[32] = "unknown";
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    if (gmtime_r(&now, &tm_utc)) {
        std::strftime(when, sizeof(when), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    }
    std::string s;
    s += "# repro seed=" + std::to_string(cfg.seed);
    s += " config_hash=" + cfg.config_hash();
    s += " version=" + std::string(kVersion);
    s += " generated_at=" + std::string(when);
    return s;
}

}  // namespace saivla
