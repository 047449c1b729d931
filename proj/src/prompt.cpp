#include "saivla/prompt.hpp"

#include <algorithm>
#include <random>

#include <json.hpp>

#include "saivla/crc32.hpp"
#include "saivla/errors.hpp"

namespace saivla {

const std::string& PromptDocument::field(const std::string& name) const {
    if (name == "goal") return goal;
    if (name == "constraints") return constraints;
    if (name == "objects") return objects;
    if (name == "failure_cases") return failure_cases;
    if (name == "environment") return environment;
    throw InvalidPrompt("unknown prompt field '" + name + "'");
}

PromptDocument parse_prompt_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidPrompt("prompt is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw InvalidPrompt("prompt must be a JSON object");
    PromptDocument doc;
    for (const char* name : kPromptFields) {
        if (!j.contains(name) || !j.at(name).is_string()) {
            throw InvalidPrompt(std::string("missing prompt field '") + name + "'");
        }
    }
    if (j.size() != kPromptFields.size()) {
        throw InvalidPrompt("prompt carries fields outside the canonical five");
    }
    doc.goal = j.at("goal").get<std::string>();
    doc.constraints = j.at("constraints").get<std::string>();
    doc.objects = j.at("objects").get<std::string>();
    doc.failure_cases = j.at("failure_cases").get<std::string>();
    doc.environment = j.at("environment").get<std::string>();
    return doc;
}

std::string prompt_hash(const PromptDocument& prompt) {
    // Canonical order with unambiguous separators, independent of how the
    // caller ordered the document.
    std::string canon;
    for (const char* name : kPromptFields) {
        canon += name;
        canon += '\x1f';
        canon += prompt.field(name);
        canon += '\x1e';
    }
    return crc32_hex(canon);
}

ShuffledPrompt shuffle_prompt_fields(const PromptDocument& prompt, double p,
                                     std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) {
        throw InvalidArgument("shuffle_prompt_fields: p must be in [0,1]");
    }
    std::mt19937_64 rng(seed);
    ShuffledPrompt out;
    out.prompt_hash = prompt_hash(prompt);

    std::vector<std::string> order(kPromptFields.begin(), kPromptFields.end());
    std::bernoulli_distribution flip(p);
    out.shuffled = flip(rng);
    if (out.shuffled) {
        std::shuffle(order.begin(), order.end(), rng);
    }
    for (const std::string& name : order) {
        out.fields.emplace_back(name, prompt.field(name));
    }
    return out;
}

std::string ShuffledPrompt::render_json() const {
    // Order-preserving rendering (nlohmann objects sort keys, so build
    // the document by hand).
    std::string text = "{";
    bool first = true;
    for (const auto& [name, value] : fields) {
        if (!first) text += ",";
        first = false;
        text += nlohmann::json(name).dump();
        text += ":";
        text += nlohmann::json(value).dump();
    }
    text += "}";
    return text;
}

}  // namespace saivla
