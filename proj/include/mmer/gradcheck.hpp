// Copyright 2026 The mmer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Central finite-difference checks of reverse-mode gradients (double only).

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmer/dataio.hpp"
#include "mmer/model.hpp"

namespace mmer {

struct GradCheckOptions {
  double step = 1e-6;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-4;
  // Coordinates checked per tensor; 0 checks all of them.
  std::size_t max_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0;
  double max_abs_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double max_rel_error() const;
  std::size_t checked() const;
};

// `loss` must return a one-element tensor computed from the current values
// of `inputs`. Every input is a leaf that requires a gradient.
GradCheckReport check_gradients(const std::function<Tensor<double>()>& loss,
                                std::span<const NamedParam<double>> inputs,
                                const GradCheckOptions& options = {});

// Composite objective of `model` on `batch` against every parameter, in eval
// mode and without gradient reversal so that the analytic gradient is the
// true derivative of the scalar being differenced.
GradCheckReport check_model_gradients(const MultimodalModel<double>& model,
                                      std::span<const ModalityBundle> batch,
                                      const GradCheckOptions& options = {});

struct NamedCheck {
  std::string name;
  GradCheckReport report;
};

// One check per differentiable primitive. Each loss is a random weighted sum
// of the primitive's output. Gradient reversal is checked composed with
// itself, where the derivative is the identity.
std::vector<NamedCheck> primitive_gradient_suite(const GradCheckOptions& options = {});

// Composite objective of a small model on a two-sample synthetic batch.
GradCheckReport composite_gradient_check(const GradCheckOptions& options = {});

}  // namespace mmer
