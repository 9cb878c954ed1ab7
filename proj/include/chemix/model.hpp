// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chemix/graph.hpp"
#include "chemix/layers.hpp"

namespace chemix {

struct InvalidSpec : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Family { FC, CNN, RNN, CNN_RNN, CNN_x_FC, RNN_x_FC, CNN_RNN_x_FC };
enum class Task { Regression, Classification };

std::string family_to_string(Family f);
Family family_from_string(const std::string& s);
std::string task_to_string(Task t);
Task task_from_string(const std::string& s);

inline constexpr Index kFingerprintWidth = 167;

struct ConvStage {
  Index filters = 32;
  Index kernel = 3;
};

struct SequenceBranchSpec {
  Index embed_dim = 32;
  std::vector<ConvStage> convs = {{32, 3}, {32, 3}};  // used by CNN-containing families
  CellKind cell = CellKind::GRU;                      // used by RNN-containing families
  Index hidden = 64;
};

/// Declarative description of one of the seven networks: three mixed
/// families (sequence branch + fingerprint branch, features concatenated)
/// and four single-representation baselines.
struct ArchitectureSpec {
  Family family = Family::CNN_x_FC;
  Task task = Task::Regression;
  std::optional<SequenceBranchSpec> sequence_branch = SequenceBranchSpec{};
  std::optional<std::vector<Index>> fingerprint_widths = std::vector<Index>{1024, 512, 256, 64};
  std::vector<Index> head = {64, 1};

  bool needs_sequence() const { return family != Family::FC; }
  bool needs_fingerprint() const {
    return family == Family::FC || family == Family::CNN_x_FC || family == Family::RNN_x_FC ||
           family == Family::CNN_RNN_x_FC;
  }
  bool has_conv() const {
    return family == Family::CNN || family == Family::CNN_RNN || family == Family::CNN_x_FC ||
           family == Family::CNN_RNN_x_FC;
  }
  bool has_recurrent() const {
    return family == Family::RNN || family == Family::CNN_RNN || family == Family::RNN_x_FC ||
           family == Family::CNN_RNN_x_FC;
  }

  void validate() const;  // throws InvalidSpec
};

// Text config, format "chemix-arch v1" (key-value lines; see README).
ArchitectureSpec parse_arch_config(const std::string& text);
std::string arch_config_to_string(const ArchitectureSpec& spec);
ArchitectureSpec load_arch_config(const std::string& path);

/// Prediction graph specialized to one batch size, plus the handles the
/// trainer needs. seq/fp handles have id -1 when the family has no such
/// input. The graph lives on the heap so NodeRefs stay valid across moves.
struct BuiltGraph {
  std::unique_ptr<ComputeGraph> graph;
  NodeRef seq_input{};
  NodeRef fp_input{};
  NodeRef output{};
};

/// A buildable model: spec + named parameter tensors. Graphs are produced on
/// demand per batch size; parameters are bound at evaluation time.
struct ModelInstance {
  ArchitectureSpec spec;
  Index vocab_size = 0;
  Index max_len = 0;
  std::uint64_t seed = 0;
  ParamMap params;
  std::vector<std::string> frozen_row0;  // parameter names with a pinned zero row 0

  BuiltGraph build_forward(Index batch) const;
  long actual_parameter_count() const;
};

/// Seeded construction; the same spec and seed give bit-identical parameters.
ModelInstance build_model(const ArchitectureSpec& spec, Index vocab_size, Index max_len,
                          std::uint64_t seed);

/// Exact number of scalars build_model will allocate, from arithmetic alone.
long parameter_count(const ArchitectureSpec& spec, Index vocab_size, Index max_len);

}  // namespace chemix
