#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "kt/dataset.hpp"
#include "kt/graph.hpp"
#include "kt/hyperparams.hpp"
#include "kt/params.hpp"
#include "kt/predictions.hpp"

namespace kt {

// ---- batching ----------------------------------------------------------------

// A contiguous run of one student's attempts. `start` is nonzero only for
// SAKT evaluation windows on sequences longer than the position table.
struct SeqView {
    int student = 0;
    int start = 0;
    int len = 0;  // attempts in the view, >= 2
};

// `window` caps the number of input steps per view (0 = unlimited).
// Consecutive windows overlap by one attempt so every target keeps its
// preceding input.
inline std::vector<SeqView> make_views(const Dataset& ds, const std::vector<int>& students,
                                       int window = 0) {
    std::vector<SeqView> views;
    for (int s : students) {
        int len = static_cast<int>(ds.sequences[s].size());
        if (len < 2) throw DataError("sequence shorter than 2 has no targets");
        if (window <= 0 || len - 1 <= window) {
            views.push_back(SeqView{s, 0, len});
            continue;
        }
        for (int start = 0; start + 1 < len; start += window)
            views.push_back(SeqView{s, start, std::min(len - start, window + 1)});
    }
    return views;
}

// Step-major padded batch. Cell (b, t) holds input attempt start+t and target
// attempt start+t+1; mask is 0 beyond a view's last target.
struct SeqBatch {
    std::vector<SeqView> views;
    int steps = 0;
    std::vector<int> encoded;     // 2s+c of the input attempt, -1 when padded
    std::vector<int> next_skill;  // skill of the target attempt, -1 when padded
    std::vector<double> label;    // correctness of the target attempt
    std::vector<double> mask;

    int batch() const { return static_cast<int>(views.size()); }
    int cell(int b, int t) const { return b * steps + t; }
};

inline SeqBatch make_batch(const Dataset& ds, const std::vector<SeqView>& views) {
    check(!views.empty(), "make_batch: no views");
    SeqBatch b;
    b.views = views;
    for (const SeqView& v : views) b.steps = std::max(b.steps, v.len - 1);
    size_t n = static_cast<size_t>(b.batch()) * b.steps;
    b.encoded.assign(n, -1);
    b.next_skill.assign(n, -1);
    b.label.assign(n, 0.0);
    b.mask.assign(n, 0.0);
    for (int i = 0; i < b.batch(); ++i) {
        const SeqView& v = views[i];
        const auto& seq = ds.sequences[v.student];
        for (int t = 0; t + 1 < v.len; ++t) {
            const Interaction& in = seq[v.start + t];
            const Interaction& target = seq[v.start + t + 1];
            int c = b.cell(i, t);
            b.encoded[c] = encode_attempt(in.skill, in.correct, ds.skill_count);
            b.next_skill[c] = target.skill;
            b.label[c] = static_cast<double>(target.correct);
            b.mask[c] = 1.0;
        }
    }
    return b;
}

// ---- model state ---------------------------------------------------------------

struct ModelState {
    HyperParams hp;
    int skill_count = 0;
    int max_steps = 0;  // SAKT position-table capacity (longest training T-1)
    ParamStore params;

    int value_dim() const {
        return hp.input == InputVariant::OneHot ? 2 * skill_count : hp.value_embed_size;
    }
    int key_dim() const { return hp.input == InputVariant::OneHot ? skill_count : hp.key_embed_size; }
};

namespace detail {

inline void add_head(ModelState& m, int head_dim, Rng& rng) {
    const HyperParams& hp = m.hp;
    if (hp.output == OutputVariant::OutputPerSkill) {
        add_glorot(m.params, "W_y", head_dim, m.skill_count, rng);
        add_zeros(m.params, "b_y", 1, m.skill_count);
    } else {
        add_glorot(m.params, "W_s", head_dim, hp.summary_size, rng);
        add_zeros(m.params, "b_s", 1, hp.summary_size);
        add_glorot(m.params, "W_y", hp.summary_size, 1, rng);
        add_zeros(m.params, "b_y", 1, 1);
    }
}

}  // namespace detail

// Allocates exactly the parameters the architecture and variants need,
// Glorot-uniform weights and zero biases, deterministic per hp.seed.
inline ModelState build_model(const HyperParams& hp, int skill_count, int max_steps = 200) {
    validate_structure(hp);
    check(skill_count > 0, "build_model: skill count must be positive");
    check(max_steps > 0, "build_model: max steps must be positive");
    ModelState m;
    m.hp = hp;
    m.skill_count = skill_count;
    m.max_steps = max_steps;
    Rng rng = Rng(hp.seed).derive("init/" + architecture_tag(hp.architecture));

    const int vd = m.value_dim();
    const int kd = m.key_dim();
    if (hp.input == InputVariant::Embedding) {
        add_glorot(m.params, "E_v", 2 * skill_count, hp.value_embed_size, rng);
        if (uses_keys(hp.architecture)) add_glorot(m.params, "E_k", skill_count, hp.key_embed_size, rng);
    }

    switch (hp.architecture) {
        case Architecture::VanillaDkt: {
            add_glorot(m.params, "W_x", vd, hp.recurrent_size, rng);
            add_glorot(m.params, "W_h", hp.recurrent_size, hp.recurrent_size, rng);
            add_zeros(m.params, "b_h", 1, hp.recurrent_size);
            detail::add_head(m, hp.recurrent_size, rng);
            break;
        }
        case Architecture::LstmDkt:
        case Architecture::LstmDktSPlus: {
            int in_dim = hp.architecture == Architecture::LstmDktSPlus ? vd + kd : vd;
            for (const char* gate : {"i", "f", "o", "m"}) {
                add_glorot(m.params, std::string("W_") + gate, in_dim, hp.recurrent_size, rng);
                add_glorot(m.params, std::string("U_") + gate, hp.recurrent_size, hp.recurrent_size, rng);
                add_zeros(m.params, std::string("b_") + gate, 1, hp.recurrent_size);
            }
            detail::add_head(m, hp.recurrent_size, rng);
            break;
        }
        case Architecture::Dkvmn:
        case Architecture::DkvmnPaper: {
            const int slots = hp.recurrent_size;
            if (hp.architecture == Architecture::DkvmnPaper) {
                add_glorot(m.params, "M_k", slots, kd, rng);
            } else {
                // repository variant: tanh FCL on the key, then dense+softmax
                add_glorot(m.params, "W_kfc", kd, kd, rng);
                add_zeros(m.params, "b_kfc", 1, kd);
                add_glorot(m.params, "W_katt", kd, slots, rng);
                add_zeros(m.params, "b_katt", 1, slots);
            }
            add_glorot(m.params, "M_v0", slots, vd, rng);  // initial value memory, trainable
            add_glorot(m.params, "W_e", vd, vd, rng);
            add_zeros(m.params, "b_e", 1, vd);
            add_glorot(m.params, "W_a", vd, vd, rng);
            add_zeros(m.params, "b_a", 1, vd);
            detail::add_head(m, kd + vd, rng);
            break;
        }
        case Architecture::Sakt: {
            const int att = hp.recurrent_size;
            add_glorot(m.params, "W_p", max_steps, vd, rng);
            add_glorot(m.params, "W_k", kd, att, rng);
            add_glorot(m.params, "W_v", vd, att, rng);
            if (!hp.shared_kv_projection) add_glorot(m.params, "W_v2", vd, att, rng);
            add_glorot(m.params, "W_o", att, att, rng);
            add_zeros(m.params, "b_o", 1, att);
            add_glorot(m.params, "W_f1", att, att, rng);
            add_zeros(m.params, "b_f1", 1, att);
            int mid = hp.uses_summary() ? hp.summary_size : att;
            add_glorot(m.params, "W_f2", att, mid, rng);
            add_zeros(m.params, "b_f2", 1, mid);
            int out = hp.output == OutputVariant::OutputPerSkill ? skill_count : 1;
            add_glorot(m.params, "W_y", mid, out, rng);
            add_zeros(m.params, "b_y", 1, out);
            break;
        }
    }
    return m;
}

// ---- input embedding --------------------------------------------------------

namespace detail {

inline Tensor one_hot_rows(const std::vector<int>& ids, int width) {
    Tensor t = Tensor::zeros(static_cast<int>(ids.size()), width);
    for (size_t r = 0; r < ids.size(); ++r)
        if (ids[r] >= 0) {
            if (ids[r] >= width) throw DataError("one-hot index out of range");
            t.at(static_cast<int>(r), ids[r]) = 1.0;
        }
    return t;
}

inline Var embed_rows(Graph& g, BoundParams& bp, const ModelState& m, const std::vector<int>& ids,
                      bool keys) {
    if (m.hp.input == InputVariant::OneHot)
        return g.leaf(one_hot_rows(ids, keys ? m.skill_count : 2 * m.skill_count));
    return g.rows_lookup(bp(keys ? "E_k" : "E_v"), ids);
}

}  // namespace detail

// Value vector for the encoded attempt 2s+c plus, for key-using
// architectures, the key vector of the next skill. One-hot inputs are
// indicator rows of width 2S / S; embedding inputs are single rows of E_v /
// E_k.
struct EmbeddedInput {
    Var value;
    Var key;  // invalid unless the architecture uses keys
};

inline EmbeddedInput embed_input(Graph& g, BoundParams& bp, const ModelState& m,
                                 const std::vector<int>& encoded, const std::vector<int>& next_skill) {
    for (int e : encoded)
        if (e >= 2 * m.skill_count) throw DataError("embed_input: encoded attempt out of range");
    for (int s : next_skill)
        if (s >= m.skill_count) throw DataError("embed_input: next skill out of range");
    EmbeddedInput out;
    out.value = detail::embed_rows(g, bp, m, encoded, /*keys=*/false);
    if (uses_keys(m.hp.architecture)) out.key = detail::embed_rows(g, bp, m, next_skill, /*keys=*/true);
    return out;
}

// ---- recurrent kernels --------------------------------------------------------

// h_t = tanh(h W_h + x W_x + b)
inline Var vanilla_step(Graph& g, BoundParams& bp, Var x, Var h_prev) {
    return g.tanh_(g.add_bias(g.add(g.matmul(h_prev, bp("W_h")), g.matmul(x, bp("W_x"))), bp("b_h")));
}

struct LstmState {
    Var h;
    Var m;
};

// Standard kernel: sigmoid gates, tanh candidate, tanh cell squash. The
// paper-literal flag reproduces the article's equation block, which writes
// the output gate with tanh and the candidate with sigmoid.
inline LstmState lstm_step(Graph& g, BoundParams& bp, Var x, LstmState prev, bool paper_literal) {
    auto gate = [&](const char* name) {
        std::string n(name);
        return g.add_bias(g.add(g.matmul(x, bp("W_" + n)), g.matmul(prev.h, bp("U_" + n))), bp("b_" + n));
    };
    Var i = g.sigmoid(gate("i"));
    Var f = g.sigmoid(gate("f"));
    Var o = paper_literal ? g.tanh_(gate("o")) : g.sigmoid(gate("o"));
    Var cand = paper_literal ? g.sigmoid(gate("m")) : g.tanh_(gate("m"));
    LstmState next;
    next.m = g.add(g.mul(f, prev.m), g.mul(i, cand));
    next.h = g.mul(o, g.tanh_(next.m));
    return next;
}

// ---- heads ---------------------------------------------------------------------

namespace detail {

// Output-per-skill: an S-sized sigmoid layer, the target skill's component is
// the prediction. Skills-to-scalar: tanh summary layer then a one-neuron
// sigmoid.
inline Var apply_head(Graph& g, BoundParams& bp, const HyperParams& hp, Var head_in,
                      const std::vector<int>& target_skills) {
    if (hp.output == OutputVariant::OutputPerSkill) {
        Var y_vec = g.sigmoid(g.add_bias(g.matmul(head_in, bp("W_y")), bp("b_y")));
        return g.select_cols(y_vec, target_skills);
    }
    Var summary = g.tanh_(g.add_bias(g.matmul(head_in, bp("W_s")), bp("b_s")));
    return g.sigmoid(g.add_bias(g.matmul(summary, bp("W_y")), bp("b_y")));
}

}  // namespace detail

// ---- DKVMN read/write -----------------------------------------------------------

struct DkvmnRead {
    Var attention;  // [B, M]
    Var read;       // [B, V]
    Var prediction; // [B, 1]
};

// dkvmn-paper: attention logits are the key memory rows dotted with the key.
// dkvmn (repository variant): the key first crosses a tanh FCL, then a dense
// layer with softmax replaces the key memory.
inline Var dkvmn_attention(Graph& g, BoundParams& bp, const ModelState& m, Var key) {
    if (m.hp.architecture == Architecture::DkvmnPaper)
        return g.softmax_rows(g.matmul_nt(key, bp("M_k")));
    Var fc = g.tanh_(g.add_bias(g.matmul(key, bp("W_kfc")), bp("b_kfc")));
    return g.softmax_rows(g.add_bias(g.matmul(fc, bp("W_katt")), bp("b_katt")));
}

// Read before write: the first step's read value depends only on the next
// skill and the initial value memory, never on correctness.
inline DkvmnRead dkvmn_read(Graph& g, BoundParams& bp, const ModelState& m, Var key, Var memory,
                            const std::vector<int>& target_skills) {
    DkvmnRead out;
    out.attention = dkvmn_attention(g, bp, m, key);
    out.read = g.attn_read(out.attention, memory, m.hp.recurrent_size);
    Var head_in = g.concat_cols(key, out.read);
    out.prediction = detail::apply_head(g, bp, m.hp, head_in, target_skills);
    return out;
}

inline Var dkvmn_write(Graph& g, BoundParams& bp, const ModelState& m, Var value, Var attention,
                       Var memory) {
    Var erase = g.sigmoid(g.add_bias(g.matmul(value, bp("W_e")), bp("b_e")));
    Var add = g.tanh_(g.add_bias(g.matmul(value, bp("W_a")), bp("b_a")));
    return g.mem_write(memory, attention, erase, add, m.hp.recurrent_size, m.hp.weighted_add);
}

// ---- forward passes ---------------------------------------------------------------

// Probabilities with their target bookkeeping; rows with mask 0 are padding.
struct ForwardOut {
    Var probs;                    // [N,1]
    Tensor labels;                // [N,1]
    Tensor mask;                  // [N,1]
    std::vector<TargetRef> refs;  // refs[i] meaningful iff mask[i] == 1
};

namespace detail {

inline std::vector<int> step_column(const SeqBatch& b, const std::vector<int>& flat, int t) {
    std::vector<int> col(b.batch());
    for (int i = 0; i < b.batch(); ++i) col[i] = flat[b.cell(i, t)];
    return col;
}

// step-major rows: row t*B + i maps to cell (i, t)
inline void fill_step_major_targets(const Dataset& ds, const SeqBatch& b, ForwardOut& out) {
    int n = b.batch() * b.steps;
    out.labels = Tensor::zeros(n, 1);
    out.mask = Tensor::zeros(n, 1);
    out.refs.assign(n, TargetRef{-1, -1, -1, 0});
    for (int t = 0; t < b.steps; ++t)
        for (int i = 0; i < b.batch(); ++i) {
            int row = t * b.batch() + i;
            int c = b.cell(i, t);
            out.labels.data[row] = b.label[c];
            out.mask.data[row] = b.mask[c];
            if (b.mask[c] != 0.0) {
                const SeqView& v = b.views[i];
                int step = v.start + t + 1;
                out.refs[row] = TargetRef{v.student, step, ds.sequences[v.student][step].skill,
                                          ds.sequences[v.student][step].correct};
            }
        }
}

}  // namespace detail

// Vanilla-DKT, LSTM-DKT and LSTM-DKT-S+: the kernel unrolls over the input
// steps; the head sees the (dropout-regularized) recurrent output. Plain
// Vanilla/LSTM with skills-to-scalar summarize h_t alone, with no next-skill
// knowledge.
inline ForwardOut rnn_dkt_forward(Graph& g, BoundParams& bp, const ModelState& m, const Dataset& ds,
                                  const SeqBatch& batch, bool training, Rng* drop_rng) {
    const HyperParams& hp = m.hp;
    const int b = batch.batch();
    Var h = g.leaf(Tensor::zeros(b, hp.recurrent_size));
    LstmState lstm{h, g.leaf(Tensor::zeros(b, hp.recurrent_size))};
    std::vector<Var> step_probs;
    step_probs.reserve(batch.steps);
    for (int t = 0; t < batch.steps; ++t) {
        EmbeddedInput in = embed_input(g, bp, m, detail::step_column(batch, batch.encoded, t),
                                       detail::step_column(batch, batch.next_skill, t));
        Var x = in.value;
        if (hp.architecture == Architecture::LstmDktSPlus) x = g.concat_cols(x, in.key);
        Var head_in;
        if (hp.architecture == Architecture::VanillaDkt) {
            h = vanilla_step(g, bp, x, h);
            head_in = h;
        } else {
            lstm = lstm_step(g, bp, x, lstm, hp.paper_literal_lstm);
            head_in = lstm.h;
        }
        head_in = g.dropout(head_in, hp.dropout_rate, training, drop_rng);
        step_probs.push_back(detail::apply_head(g, bp, hp, head_in, detail::step_column(batch, batch.next_skill, t)));
    }
    ForwardOut out;
    out.probs = g.concat_rows(step_probs);
    detail::fill_step_major_targets(ds, batch, out);
    return out;
}

inline ForwardOut dkvmn_forward(Graph& g, BoundParams& bp, const ModelState& m, const Dataset& ds,
                                const SeqBatch& batch, bool training, Rng* drop_rng) {
    const HyperParams& hp = m.hp;
    const int b = batch.batch();
    Var memory = g.tile_rows(bp("M_v0"), b);
    std::vector<Var> step_probs;
    step_probs.reserve(batch.steps);
    for (int t = 0; t < batch.steps; ++t) {
        std::vector<int> skills = detail::step_column(batch, batch.next_skill, t);
        EmbeddedInput in = embed_input(g, bp, m, detail::step_column(batch, batch.encoded, t), skills);

        // read with dropout on the head input, mirroring the RNN placement
        Var attention = dkvmn_attention(g, bp, m, in.key);
        Var read = g.attn_read(attention, memory, hp.recurrent_size);
        Var head_in = g.dropout(g.concat_cols(in.key, read), hp.dropout_rate, training, drop_rng);
        step_probs.push_back(detail::apply_head(g, bp, hp, head_in, skills));

        memory = dkvmn_write(g, bp, m, in.value, attention, memory);
    }
    ForwardOut out;
    out.probs = g.concat_rows(step_probs);
    detail::fill_step_major_targets(ds, batch, out);
    return out;
}

namespace detail {

inline Tensor causal_mask(int n) {
    Tensor m = Tensor::zeros(n, n);
    for (int q = 0; q < n; ++q)
        for (int k = 0; k <= q; ++k) m.at(q, k) = 1.0;
    return m;
}

}  // namespace detail

// SAKT processes each view as a whole: positioned value embeddings serve as
// attention keys and values, the next-skill key embeddings as queries, with a
// causal mask so the query for target t sees only attempts before t. The
// feed-forward stack is ReLU FCL, linear FCL (sized S' under
// skills-to-scalar), sigmoid output layer.
inline ForwardOut sakt_forward(Graph& g, BoundParams& bp, const ModelState& m, const Dataset& ds,
                               const SeqBatch& batch, bool training, Rng* drop_rng) {
    const HyperParams& hp = m.hp;
    const int att = hp.recurrent_size;
    const int heads = hp.attention_heads;
    const int head_dim = att / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(att));

    std::vector<Var> view_probs;
    ForwardOut out;
    for (int i = 0; i < batch.batch(); ++i) {
        const SeqView& view = batch.views[i];
        const int t_steps = view.len - 1;
        check(t_steps <= m.max_steps, "sakt: view longer than the position table");
        std::vector<int> encoded(t_steps), skills(t_steps), positions(t_steps);
        for (int t = 0; t < t_steps; ++t) {
            encoded[t] = batch.encoded[batch.cell(i, t)];
            skills[t] = batch.next_skill[batch.cell(i, t)];
            positions[t] = t;
        }
        EmbeddedInput in = embed_input(g, bp, m, encoded, skills);
        Var positioned = g.add(in.value, g.rows_lookup(bp("W_p"), positions));
        Var q = g.matmul(in.key, bp("W_k"));
        Var k = g.matmul(positioned, bp("W_v"));
        Var v = g.matmul(positioned, bp(hp.shared_kv_projection ? "W_v" : "W_v2"));

        Tensor mask = detail::causal_mask(t_steps);
        std::vector<Var> head_outs;
        head_outs.reserve(heads);
        for (int hix = 0; hix < heads; ++hix) {
            Var qh = g.slice_cols(q, hix * head_dim, head_dim);
            Var kh = g.slice_cols(k, hix * head_dim, head_dim);
            Var vh = g.slice_cols(v, hix * head_dim, head_dim);
            Var scores = g.scale(g.matmul_nt(qh, kh), scale);
            Var weights = g.masked_softmax_rows(scores, mask);
            head_outs.push_back(g.matmul(weights, vh));
        }
        Var attn = head_outs[0];
        for (size_t hx = 1; hx < head_outs.size(); ++hx) attn = g.concat_cols(attn, head_outs[hx]);
        attn = g.dropout(g.add_bias(g.matmul(attn, bp("W_o")), bp("b_o")), hp.dropout_rate, training,
                         drop_rng);
        Var f1 = g.dropout(g.relu(g.add_bias(g.matmul(attn, bp("W_f1")), bp("b_f1"))), hp.dropout_rate,
                           training, drop_rng);
        Var f2 = g.dropout(g.add_bias(g.matmul(f1, bp("W_f2")), bp("b_f2")), hp.dropout_rate, training,
                           drop_rng);
        Var probs;
        if (hp.output == OutputVariant::OutputPerSkill) {
            Var y_vec = g.sigmoid(g.add_bias(g.matmul(f2, bp("W_y")), bp("b_y")));
            probs = g.select_cols(y_vec, skills);
        } else {
            probs = g.sigmoid(g.add_bias(g.matmul(f2, bp("W_y")), bp("b_y")));
        }
        view_probs.push_back(probs);
        for (int t = 0; t < t_steps; ++t) {
            int step = view.start + t + 1;
            out.refs.push_back(TargetRef{view.student, step, ds.sequences[view.student][step].skill,
                                         ds.sequences[view.student][step].correct});
        }
    }
    out.probs = g.concat_rows(view_probs);
    int n = static_cast<int>(out.refs.size());
    out.labels = Tensor::zeros(n, 1);
    out.mask = Tensor::zeros(n, 1);
    for (int r = 0; r < n; ++r) {
        out.labels.data[r] = static_cast<double>(out.refs[r].label);
        out.mask.data[r] = 1.0;
    }
    return out;
}

inline ForwardOut forward_batch(Graph& g, BoundParams& bp, const ModelState& m, const Dataset& ds,
                                const SeqBatch& batch, bool training, Rng* drop_rng) {
    switch (m.hp.architecture) {
        case Architecture::VanillaDkt:
        case Architecture::LstmDkt:
        case Architecture::LstmDktSPlus:
            return rnn_dkt_forward(g, bp, m, ds, batch, training, drop_rng);
        case Architecture::Dkvmn:
        case Architecture::DkvmnPaper:
            return dkvmn_forward(g, bp, m, ds, batch, training, drop_rng);
        case Architecture::Sakt:
            return sakt_forward(g, bp, m, ds, batch, training, drop_rng);
    }
    throw InternalError("forward_batch: unknown architecture");
}

// ---- scoring -------------------------------------------------------------------

// Deterministic inference over the canonical targets of `students`.
// Sequences beyond SAKT's position table are processed in maximal windows.
inline PredictionBatch score_model(ModelState& m, const Dataset& ds, const std::vector<int>& students) {
    int window = m.hp.architecture == Architecture::Sakt ? m.max_steps : 0;
    std::vector<SeqView> views = make_views(ds, students, window);
    std::vector<std::tuple<int, int, TargetRef, double>> scored;  // (list rank, step, ...)
    std::unordered_map<int, int> rank;
    for (size_t i = 0; i < students.size(); ++i) rank.emplace(students[i], static_cast<int>(i));
    for (size_t at = 0; at < views.size(); at += m.hp.batch_size) {
        std::vector<SeqView> chunk(views.begin() + at,
                                   views.begin() + std::min(views.size(), at + m.hp.batch_size));
        SeqBatch batch = make_batch(ds, chunk);
        Graph g;
        BoundParams bp(g, m.params);
        ForwardOut out = forward_batch(g, bp, m, ds, batch, /*training=*/false, nullptr);
        const Tensor& probs = g.value(out.probs);
        for (size_t r = 0; r < out.refs.size(); ++r)
            if (out.mask.data[r] != 0.0)
                scored.emplace_back(rank.at(out.refs[r].student), out.refs[r].step, out.refs[r],
                                    probs.data[r]);
    }
    // canonical targets_of order: student-list order, then step
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return std::make_pair(std::get<0>(a), std::get<1>(a)) <
               std::make_pair(std::get<0>(b), std::get<1>(b));
    });
    PredictionBatch pb;
    pb.targets.reserve(scored.size());
    pb.probs.reserve(scored.size());
    for (auto& [r, s, ref, p] : scored) {
        pb.targets.push_back(ref);
        pb.probs.push_back(p);
    }
    return pb;
}

}  // namespace kt
