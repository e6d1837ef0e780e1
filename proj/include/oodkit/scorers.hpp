#pragma once

#include "oodkit/tensor.hpp"

namespace oodkit::scorers {

// Logit maps are [C, ...spatial] with the class axis first (C >= 2).
// Prediction stacks are [S, ...spatial] with S >= 2 passes or members,
// holding probabilities in [0, 1].

/// Temperatures searched for MSP temperature scaling and energy scoring.
inline constexpr double kTemperatureGrid[] = {1, 2, 3, 4, 5, 10, 100, 1000};

/// 1 - voxel-mean of the maximum softmax probability of logits / temperature.
double msp_score(const Tensor& logits, double temperature = 1.0);

/// Voxel-mean of -T * logsumexp(f / T). Higher means more OOD.
double energy_score(const Tensor& logits, double temperature = 1.0);

/// Voxel-mean of the population standard deviation across the stack axis.
double uncertainty_score(const Tensor& stack);

void validate_logits(const Tensor& logits);
void validate_stack(const Tensor& stack);

}  // namespace oodkit::scorers
