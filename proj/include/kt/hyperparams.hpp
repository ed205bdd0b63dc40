#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <tuple>

#include "kt/errors.hpp"

namespace kt {

enum class Architecture { VanillaDkt, LstmDkt, LstmDktSPlus, Dkvmn, DkvmnPaper, Sakt };

enum class InputVariant { OneHot, Embedding };
enum class OutputVariant { OutputPerSkill, SkillsToScalar };

inline std::string architecture_tag(Architecture a) {
    switch (a) {
        case Architecture::VanillaDkt: return "vanilla-dkt";
        case Architecture::LstmDkt: return "lstm-dkt";
        case Architecture::LstmDktSPlus: return "lstm-dkt-s+";
        case Architecture::Dkvmn: return "dkvmn";
        case Architecture::DkvmnPaper: return "dkvmn-paper";
        case Architecture::Sakt: return "sakt";
    }
    throw InternalError("unknown architecture");
}

inline Architecture architecture_from_tag(const std::string& tag) {
    if (tag == "vanilla-dkt") return Architecture::VanillaDkt;
    if (tag == "lstm-dkt") return Architecture::LstmDkt;
    if (tag == "lstm-dkt-s+") return Architecture::LstmDktSPlus;
    if (tag == "dkvmn") return Architecture::Dkvmn;
    if (tag == "dkvmn-paper") return Architecture::DkvmnPaper;
    if (tag == "sakt") return Architecture::Sakt;
    throw UsageError("unknown model tag '" + tag +
                     "' (deep models: vanilla-dkt lstm-dkt lstm-dkt-s+ dkvmn dkvmn-paper sakt)");
}

// Architectures that take the next-skill key stream as input.
inline bool uses_keys(Architecture a) {
    return a == Architecture::LstmDktSPlus || a == Architecture::Dkvmn ||
           a == Architecture::DkvmnPaper || a == Architecture::Sakt;
}

// One grid-search point. recurrent_size doubles as LSTM/RNN hidden size,
// DKVMN memory slot count M and SAKT attention size A.
struct HyperParams {
    Architecture architecture = Architecture::LstmDkt;
    int recurrent_size = 50;
    int key_embed_size = 20;    // K; forced to S under one-hot input
    int value_embed_size = 20;  // V; forced to 2S under one-hot input
    int summary_size = 50;      // S'; unused with output-per-skill
    InputVariant input = InputVariant::Embedding;
    OutputVariant output = OutputVariant::SkillsToScalar;
    double learning_rate = 0.001;
    double dropout_rate = 0.2;
    int attention_heads = 1;  // SAKT only
    int batch_size = 32;
    uint64_t seed = 13;

    // Flags resolving points where published descriptions of these models
    // diverge from their reference implementations.
    bool paper_literal_lstm = false;   // tanh output gate, sigmoid candidate
    bool weighted_add = false;         // DKVMN write: weight the addition vector too
    bool shared_kv_projection = false; // SAKT: one matrix for key and value projections

    bool uses_summary() const { return output == OutputVariant::SkillsToScalar; }

    auto ordering_key() const {
        return std::make_tuple(static_cast<int>(architecture), recurrent_size, key_embed_size,
                               value_embed_size, summary_size, static_cast<int>(input),
                               static_cast<int>(output), learning_rate, attention_heads, batch_size,
                               seed);
    }

    std::string str() const {
        std::ostringstream os;
        os << architecture_tag(architecture) << ";rec=" << recurrent_size;
        os << ";key=" << key_embed_size << ";val=" << value_embed_size << ";sum=" << summary_size;
        os << ";input=" << (input == InputVariant::OneHot ? "onehot" : "embed");
        os << ";output=" << (output == OutputVariant::OutputPerSkill ? "per-skill" : "scalar");
        os << ";lr=" << learning_rate << ";drop=" << dropout_rate << ";heads=" << attention_heads;
        os << ";batch=" << batch_size << ";seed=" << seed;
        if (paper_literal_lstm) os << ";paper-literal-lstm";
        if (weighted_add) os << ";weighted-add";
        if (shared_kv_projection) os << ";shared-kv-projection";
        return os.str();
    }

    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// key=value lines (and bare flag names), e.g. a --hyper config file.
inline HyperParams hyperparams_from_config(const std::map<std::string, std::string>& kv,
                                           Architecture arch) {
    HyperParams hp;
    hp.architecture = arch;
    for (const auto& [key, value] : kv) {
        try {
            if (key == "recurrent_size") hp.recurrent_size = std::stoi(value);
            else if (key == "key_embed_size") hp.key_embed_size = std::stoi(value);
            else if (key == "value_embed_size") hp.value_embed_size = std::stoi(value);
            else if (key == "summary_size") hp.summary_size = std::stoi(value);
            else if (key == "input") {
                if (value == "onehot") hp.input = InputVariant::OneHot;
                else if (value == "embed") hp.input = InputVariant::Embedding;
                else throw UsageError("hyper: input must be onehot|embed");
            } else if (key == "output") {
                if (value == "per-skill") hp.output = OutputVariant::OutputPerSkill;
                else if (value == "scalar") hp.output = OutputVariant::SkillsToScalar;
                else throw UsageError("hyper: output must be per-skill|scalar");
            } else if (key == "learning_rate") hp.learning_rate = std::stod(value);
            else if (key == "dropout") hp.dropout_rate = std::stod(value);
            else if (key == "attention_heads") hp.attention_heads = std::stoi(value);
            else if (key == "batch_size") hp.batch_size = std::stoi(value);
            else if (key == "seed") hp.seed = std::stoull(value);
            else if (key == "paper_literal_lstm") hp.paper_literal_lstm = value == "1" || value == "true";
            else if (key == "weighted_add") hp.weighted_add = value == "1" || value == "true";
            else if (key == "shared_kv_projection") hp.shared_kv_projection = value == "1" || value == "true";
            else throw UsageError("hyper: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw UsageError("hyper: bad value '" + value + "' for " + key);
        }
    }
    return hp;
}

// Structural contradictions are rejected here regardless of grid membership;
// grid-domain checks live with the grid search.
inline void validate_structure(const HyperParams& hp) {
    if (hp.recurrent_size <= 0 || hp.key_embed_size <= 0 || hp.value_embed_size <= 0 ||
        hp.summary_size <= 0)
        throw UsageError("hyperparams: layer sizes must be positive");
    if (hp.learning_rate <= 0.0) throw UsageError("hyperparams: learning rate must be positive");
    if (hp.dropout_rate < 0.0 || hp.dropout_rate >= 1.0)
        throw UsageError("hyperparams: dropout must be in [0,1)");
    if (hp.batch_size < 1) throw UsageError("hyperparams: batch size must be >= 1");
    if (hp.attention_heads < 1) throw UsageError("hyperparams: attention heads must be >= 1");
    if (hp.architecture != Architecture::Sakt && hp.attention_heads != 1)
        throw UsageError("hyperparams: attention heads apply only to sakt");
    if (hp.architecture == Architecture::Sakt && hp.recurrent_size % hp.attention_heads != 0)
        throw UsageError("hyperparams: attention size " + std::to_string(hp.recurrent_size) +
                         " not divisible by " + std::to_string(hp.attention_heads) + " heads");
}

}  // namespace kt
