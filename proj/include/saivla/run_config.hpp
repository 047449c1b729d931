#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace saivla {

inline constexpr const char* kSeedEnvVar = "SAIVLA_SEED";
inline constexpr const char* kVersion = "0.1.0";

// Defaults follow the stack's standard operating point; every field can be
// overridden by a config file and again by command-line flags.
struct RunConfig {
    std::size_t brain_interval = 5;   // N, chunks per brain call
    std::size_t chunk_steps = 20;     // K, steps per forward
    std::size_t action_dims = 16;     // D
    std::size_t context_tokens = 24;  // Nc
    double delta_p_mm = 5.0;
    double delta_theta_deg = 1.0;
    double theta = 0.2;     // hysteresis margin (up and down)
    double alpha = 0.8;     // EMA coefficient
    double tau_start = 1.5;
    double tau_end = 0.7;
    std::size_t tau_horizon = 1000;
    double f_fwd = 2.0;
    std::uint64_t seed = 0;
    std::string output_dir = ".";

    void validate() const;
    std::string to_json() const;       // canonical serialization
    std::string config_hash() const;   // crc32 hex of to_json()
};

// Layered merge with precedence flags > config file > environment seed >
// defaults. config_json_text is the raw config file contents (JSON object
// with any subset of the field names); flag_overrides maps field name to
// the flag's string value.
RunConfig merge_run_config(const RunConfig& defaults,
                           const std::optional<std::string>& config_json_text,
                           const std::map<std::string, std::string>& flag_overrides);

// Reproducibility stanza emitted by every subcommand.
std::string repro_stanza(const RunConfig& cfg);

}  // namespace saivla
