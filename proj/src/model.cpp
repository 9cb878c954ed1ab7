// SPDX-License-Identifier: Apache-2.0
#include "chemix/model.hpp"

#include <fstream>
#include <sstream>

namespace chemix {

std::string family_to_string(Family f) {
  switch (f) {
    case Family::FC: return "fc";
    case Family::CNN: return "cnn";
    case Family::RNN: return "rnn";
    case Family::CNN_RNN: return "cnn_rnn";
    case Family::CNN_x_FC: return "cnn_x_fc";
    case Family::RNN_x_FC: return "rnn_x_fc";
    case Family::CNN_RNN_x_FC: return "cnn_rnn_x_fc";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  for (Family f : {Family::FC, Family::CNN, Family::RNN, Family::CNN_RNN, Family::CNN_x_FC,
                   Family::RNN_x_FC, Family::CNN_RNN_x_FC})
    if (family_to_string(f) == s) return f;
  throw InvalidSpec("unknown family '" + s + "'");
}

std::string task_to_string(Task t) {
  return t == Task::Regression ? "regression" : "classification";
}

Task task_from_string(const std::string& s) {
  if (s == "regression") return Task::Regression;
  if (s == "classification") return Task::Classification;
  throw InvalidSpec("unknown task '" + s + "'");
}

void ArchitectureSpec::validate() const {
  if (needs_sequence() && !sequence_branch)
    throw InvalidSpec("family " + family_to_string(family) + " requires a sequence branch");
  if (needs_fingerprint() && (!fingerprint_widths || fingerprint_widths->empty()))
    throw InvalidSpec("family " + family_to_string(family) + " requires a fingerprint branch");
  if (head.empty() || head.back() != 1)
    throw InvalidSpec("head must end with one output unit");
  for (Index w : head)
    if (w < 1) throw InvalidSpec("head widths must be >= 1");
  if (sequence_branch) {
    const SequenceBranchSpec& sb = *sequence_branch;
    if (sb.embed_dim < 1) throw InvalidSpec("embed_dim must be >= 1");
    if (has_conv() && sb.convs.empty())
      throw InvalidSpec("family " + family_to_string(family) + " requires conv stages");
    for (const ConvStage& c : sb.convs)
      if (c.filters < 1 || c.kernel < 1) throw InvalidSpec("conv stages must be >= 1");
    if (has_recurrent() && sb.hidden < 1) throw InvalidSpec("recurrent hidden must be >= 1");
  }
  if (fingerprint_widths)
    for (Index w : *fingerprint_widths)
      if (w < 1) throw InvalidSpec("fingerprint widths must be >= 1");
}

// ---------------------------------------------------------------------------
// config text

std::string arch_config_to_string(const ArchitectureSpec& spec) {
  std::ostringstream os;
  os << "chemix-arch v1\n";
  os << "family " << family_to_string(spec.family) << '\n';
  os << "task " << task_to_string(spec.task) << '\n';
  if (spec.needs_sequence() && spec.sequence_branch) {
    const SequenceBranchSpec& sb = *spec.sequence_branch;
    os << "embed_dim " << sb.embed_dim << '\n';
    if (spec.has_conv())
      for (const ConvStage& c : sb.convs) os << "conv " << c.filters << ' ' << c.kernel << '\n';
    if (spec.has_recurrent())
      os << "recurrent " << (sb.cell == CellKind::GRU ? "gru" : "lstm") << ' ' << sb.hidden
         << '\n';
  }
  if (spec.needs_fingerprint() && spec.fingerprint_widths) {
    os << "fc";
    for (Index w : *spec.fingerprint_widths) os << ' ' << w;
    os << '\n';
  }
  os << "head";
  for (Index w : spec.head) os << ' ' << w;
  os << '\n';
  return os.str();
}

ArchitectureSpec parse_arch_config(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw InvalidSpec("empty arch config");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "chemix-arch v1") throw InvalidSpec("bad arch config header: '" + line + "'");

  ArchitectureSpec spec;
  spec.sequence_branch = SequenceBranchSpec{};
  spec.sequence_branch->convs.clear();
  spec.fingerprint_widths = std::nullopt;
  bool saw_family = false, saw_head = false;

  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto bad = [&](const std::string& why) {
      throw InvalidSpec("arch config line " + std::to_string(lineno) + ": " + why);
    };
    if (key == "family") {
      std::string v;
      ls >> v;
      spec.family = family_from_string(v);
      saw_family = true;
    } else if (key == "task") {
      std::string v;
      ls >> v;
      spec.task = task_from_string(v);
    } else if (key == "embed_dim") {
      if (!(ls >> spec.sequence_branch->embed_dim)) bad("embed_dim needs an integer");
    } else if (key == "conv") {
      ConvStage c;
      if (!(ls >> c.filters >> c.kernel)) bad("conv needs <filters> <kernel>");
      spec.sequence_branch->convs.push_back(c);
    } else if (key == "recurrent") {
      std::string kind;
      if (!(ls >> kind >> spec.sequence_branch->hidden)) bad("recurrent needs <gru|lstm> <hidden>");
      if (kind == "gru") spec.sequence_branch->cell = CellKind::GRU;
      else if (kind == "lstm") spec.sequence_branch->cell = CellKind::LSTM;
      else bad("unknown recurrent kind '" + kind + "'");
    } else if (key == "fc") {
      std::vector<Index> widths;
      Index w;
      while (ls >> w) widths.push_back(w);
      if (widths.empty()) bad("fc needs at least one width");
      spec.fingerprint_widths = widths;
    } else if (key == "head") {
      spec.head.clear();
      Index w;
      while (ls >> w) spec.head.push_back(w);
      saw_head = true;
    } else {
      bad("unknown key '" + key + "'");
    }
  }
  if (!saw_family) throw InvalidSpec("arch config is missing 'family'");
  if (!saw_head) spec.head = {64, 1};
  if (spec.has_conv() && spec.sequence_branch->convs.empty())
    spec.sequence_branch->convs = {{32, 3}, {32, 3}};
  if (spec.needs_fingerprint() && !spec.fingerprint_widths)
    spec.fingerprint_widths = std::vector<Index>{1024, 512, 256, 64};
  if (!spec.needs_sequence()) spec.sequence_branch = std::nullopt;
  spec.validate();
  return spec;
}

ArchitectureSpec load_arch_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidSpec("cannot read arch config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_arch_config(buf.str());
}

// ---------------------------------------------------------------------------
// building

namespace {

struct BranchWidths {
  Index seq_out = 0;  // flattened conv map or recurrent hidden
  Index fp_out = 0;
};

BranchWidths branch_widths(const ArchitectureSpec& spec, Index max_len) {
  BranchWidths w;
  if (spec.needs_sequence()) {
    const SequenceBranchSpec& sb = *spec.sequence_branch;
    if (spec.has_recurrent()) {
      w.seq_out = sb.hidden;
    } else {
      w.seq_out = max_len * sb.convs.back().filters;  // flattened (len, filters) map
    }
  }
  if (spec.needs_fingerprint()) w.fp_out = spec.fingerprint_widths->back();
  return w;
}

}  // namespace

ModelInstance build_model(const ArchitectureSpec& spec, Index vocab_size, Index max_len,
                          std::uint64_t seed) {
  spec.validate();
  if (vocab_size < 1 || max_len < 1)
    throw InvalidSpec("vocab_size and max_len must be >= 1");

  ModelInstance model;
  model.spec = spec;
  model.vocab_size = vocab_size;
  model.max_len = max_len;
  model.seed = seed;

  SplitMix64 rng(seed);
  // Draw order is fixed: embedding, conv stages, recurrent, fingerprint
  // chain, head. Changing it would change every seeded initialization.
  if (spec.needs_sequence()) {
    const SequenceBranchSpec& sb = *spec.sequence_branch;
    init_embedding(model.params, "embed", {vocab_size, sb.embed_dim}, rng);
    model.frozen_row0.push_back("embed.table");
    if (spec.has_conv()) {
      Index ch = sb.embed_dim;
      for (std::size_t i = 0; i < sb.convs.size(); ++i) {
        const ConvStage& c = sb.convs[i];
        init_conv1d(model.params, "conv" + std::to_string(i + 1),
                    {c.kernel, ch, c.filters, true}, rng);
        ch = c.filters;
      }
    }
    if (spec.has_recurrent()) {
      const Index in = spec.has_conv() ? sb.convs.back().filters : sb.embed_dim;
      init_recurrent(model.params, "rnn", {sb.cell, in, sb.hidden}, rng);
    }
  }
  if (spec.needs_fingerprint()) {
    Index in = kFingerprintWidth;
    const std::vector<Index>& widths = *spec.fingerprint_widths;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      init_dense(model.params, "fp" + std::to_string(i + 1),
                 {in, widths[i], Activation::Relu}, rng);
      in = widths[i];
    }
  }
  {
    const BranchWidths bw = branch_widths(spec, max_len);
    Index in = bw.seq_out + bw.fp_out;
    for (std::size_t i = 0; i < spec.head.size(); ++i) {
      const bool last = i + 1 == spec.head.size();
      init_dense(model.params, "head" + std::to_string(i + 1),
                 {in, spec.head[i], last ? Activation::Linear : Activation::Relu}, rng);
      in = spec.head[i];
    }
  }
  return model;
}

BuiltGraph ModelInstance::build_forward(Index batch) const {
  spec.validate();
  BuiltGraph built;
  built.graph = std::make_unique<ComputeGraph>();
  ComputeGraph& g = *built.graph;

  NodeRef seq_out{}, fp_out{};
  if (spec.needs_sequence()) {
    const SequenceBranchSpec& sb = *spec.sequence_branch;
    built.seq_input = g.input("seq", {batch, max_len});
    NodeRef h = embed(g, built.seq_input, "embed", {vocab_size, sb.embed_dim});
    if (spec.has_conv()) {
      Index ch = sb.embed_dim;
      for (std::size_t i = 0; i < sb.convs.size(); ++i) {
        const ConvStage& c = sb.convs[i];
        h = conv1d(g, h, "conv" + std::to_string(i + 1), {c.kernel, ch, c.filters, true});
        ch = c.filters;
      }
    }
    if (spec.has_recurrent()) {
      const Index in = spec.has_conv() ? sb.convs.back().filters : sb.embed_dim;
      seq_out = recurrent(g, h, "rnn", {sb.cell, in, sb.hidden}, /*return_sequence=*/false);
    } else {
      seq_out = reshape(h, {batch, max_len * sb.convs.back().filters});
    }
  }
  if (spec.needs_fingerprint()) {
    built.fp_input = g.input("fp", {batch, kFingerprintWidth});
    NodeRef h = built.fp_input;
    Index in = kFingerprintWidth;
    const std::vector<Index>& widths = *spec.fingerprint_widths;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      h = dense(g, h, "fp" + std::to_string(i + 1), {in, widths[i], Activation::Relu});
      in = widths[i];
    }
    fp_out = h;
  }

  NodeRef merged;
  if (seq_out.graph && fp_out.graph) merged = concat_last(seq_out, fp_out);
  else merged = seq_out.graph ? seq_out : fp_out;

  const BranchWidths bw = branch_widths(spec, max_len);
  Index in = bw.seq_out + bw.fp_out;
  NodeRef h = merged;
  for (std::size_t i = 0; i < spec.head.size(); ++i) {
    const bool last = i + 1 == spec.head.size();
    h = dense(g, h, "head" + std::to_string(i + 1),
              {in, spec.head[i], last ? Activation::Linear : Activation::Relu});
    in = spec.head[i];
  }
  built.output = spec.task == Task::Classification ? sigmoid(h) : h;
  return built;
}

long ModelInstance::actual_parameter_count() const {
  long n = 0;
  for (const auto& [name, t] : params) n += static_cast<long>(t.size());
  return n;
}

long parameter_count(const ArchitectureSpec& spec, Index vocab_size, Index max_len) {
  spec.validate();
  if (vocab_size < 1 || max_len < 1)
    throw InvalidSpec("vocab_size and max_len must be >= 1");
  long n = 0;
  if (spec.needs_sequence()) {
    const SequenceBranchSpec& sb = *spec.sequence_branch;
    n += (vocab_size + 1) * sb.embed_dim;
    if (spec.has_conv()) {
      Index ch = sb.embed_dim;
      for (const ConvStage& c : sb.convs) {
        n += c.kernel * ch * c.filters + c.filters;
        ch = c.filters;
      }
    }
    if (spec.has_recurrent()) {
      const Index in = spec.has_conv() ? sb.convs.back().filters : sb.embed_dim;
      const Index gates = sb.cell == CellKind::GRU ? 3 : 4;
      n += gates * sb.hidden * (in + sb.hidden + 1);
    }
  }
  if (spec.needs_fingerprint()) {
    Index in = kFingerprintWidth;
    for (Index w : *spec.fingerprint_widths) {
      n += in * w + w;
      in = w;
    }
  }
  const BranchWidths bw = branch_widths(spec, max_len);
  Index in = bw.seq_out + bw.fp_out;
  for (Index w : spec.head) {
    n += in * w + w;
    in = w;
  }
  return n;
}

}  // namespace chemix
