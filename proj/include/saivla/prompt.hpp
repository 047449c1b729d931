#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace saivla {

// Canonical field order of the structured prompt document.
inline constexpr std::array<const char*, 5> kPromptFields = {
    "goal", "constraints", "objects", "failure_cases", "environment"};

struct PromptDocument {
    std::string goal;
    std::string constraints;
    std::string objects;
    std::string failure_cases;
    std::string environment;

    const std::string& field(const std::string& name) const;
};

struct ShuffledPrompt {
    // Field order as emitted (possibly permuted).
    std::vector<std::pair<std::string, std::string>> fields;
    // crc32 hex of the canonical-order serialization; invariant under
    // permutation, sensitive to any content change.
    std::string prompt_hash;
    bool shuffled = false;

    std::string render_json() const;
};

// Parses a JSON object that must carry exactly the five canonical fields.
PromptDocument parse_prompt_json(const std::string& text);

// With probability p the emitted field order is a uniform random
// permutation, otherwise canonical; the hash never depends on the order.
ShuffledPrompt shuffle_prompt_fields(const PromptDocument& prompt, double p,
                                     std::uint64_t seed);

std::string prompt_hash(const PromptDocument& prompt);

}  // namespace saivla
