#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphood/graph.hpp"

namespace graphood {

// Stochastic block model with Gaussian class-mean features; the desk-scale
// stand-in for citation benchmarks.
struct SbmConfig {
  int num_blocks = 4;
  int nodes_per_block = 150;
  double p_in = 0.1;
  double p_out = 0.01;
  int feature_dim = 16;
  double class_mean_scale = 1.0;
  double feature_noise = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SbmConfig load_sbm_config(const std::string& path);
std::string sbm_config_to_json(const SbmConfig& cfg);
SbmConfig sbm_config_from_json(const std::string& json_text);

// How OOD nodes are synthesized on top of an existing dataset.
struct OodSpec {
  std::string kind = "structure";  // structure | feature | label-leave-out
  double frac_ood = 0.2;           // structure, feature
  double avg_degree = 10.0;        // structure
  double lambda_interp = 0.5;      // feature
  bool random_lambda = false;      // feature: draw lambda ~ U(0,1) per node
  std::vector<int> held_out_classes;  // label-leave-out
  double expose_frac = 0.0;        // fraction of new OOD nodes exposed for training
  std::uint64_t seed = 0;

  void validate() const;
};

OodSpec load_ood_spec(const std::string& path);
std::string ood_spec_to_json(const OodSpec& spec);
OodSpec ood_spec_from_json(const std::string& json_text);

// Per-class 1:1:8 train/val/test_id split; pure function of (cfg).
GraphDataset generate_sbm(const SbmConfig& cfg);

// Appends ceil(frac_ood * n) nodes with features copied from random original
// nodes and Erdos-Renyi wiring at the requested expected degree. Original
// edges are untouched.
GraphDataset structure_manipulation(const GraphDataset& g, double frac_ood, double avg_degree,
                                    double expose_frac, std::uint64_t seed);

// Replaces the features of sampled test nodes with interpolations
// lambda * x_u + (1 - lambda) * x_v of two random original nodes; the graph
// structure is unchanged.
GraphDataset feature_interpolation(const GraphDataset& g, double frac_ood, double lambda_interp,
                                   bool random_lambda, double expose_frac, std::uint64_t seed);

// Held-out classes become OOD (label -1), remaining classes are relabeled
// to a dense [0, C') range.
GraphDataset label_leave_out(const GraphDataset& g, const std::vector<int>& held_out_classes,
                             double expose_frac, std::uint64_t seed);

GraphDataset apply_ood_spec(const GraphDataset& g, const OodSpec& spec);

}  // namespace graphood
