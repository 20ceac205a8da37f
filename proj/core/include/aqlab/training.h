// Copyright 2026 The aqlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AQLAB_TRAINING_H
#define AQLAB_TRAINING_H

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "aqlab/aq_decoder.h"
#include "aqlab/circuit.h"
#include "aqlab/params.h"
#include "aqlab/rng.h"
#include "aqlab/sim.h"

namespace aqlab {

enum Head : size_t { kFinal = 0, kFake, kNoiseless, kDelta, kNoiselessToFake, kNumHeads };
const char *head_name(size_t head);

struct LossWeights {
    std::array<double, kNumHeads> w{1.2, 1.0, 1.0, 1.0, 8.0};
};

struct NoiseComponent {
    double p;
    double weight;
};

struct TrainConfig {
    CodeKind code = CodeKind::Surface;
    Basis basis = Basis::Z;
    std::vector<int> distances{3};
    std::vector<uint32_t> cycles{10};
    std::vector<NoiseComponent> noise{{0.003, 1}, {0.005, 2}, {0.008, 1}};
    double base_learning_rate = 1e-3;
    size_t batch_size = 64;
    uint64_t total_examples = 100000;
    double warmup_fraction = 0.05;
    bool cosine_decay = false;
    double mask_fraction = 0.5;
    double mask_example_fraction = 0.8;
    bool aux_heads = true;
    LossWeights weights;
    LionConfig lion;
    uint64_t seed = 0;
    /// Frozen development set used for periodic evaluation (0 disables it).
    size_t dev_shots = 2000;
    double dev_p = 0.005;
    uint64_t eval_every = 50000;
    uint64_t checkpoint_every = 0;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string &text);
};

/// base * 0.8^(log2(N_s / 8)) * 2^(log2(R / 24)); for the colour code R counts
/// doubled cycles.
double lr_scale(double base, size_t stabilizers, double cycles);
double lr_scale(double base, size_t stabilizers, uint32_t cycles, CodeKind code);

/// Sampling weights over `distances` (sorted ascending) at training progress
/// in [0, 1]. Mass moves linearly from the smallest to the largest distance on
/// top of a small uniform floor.
std::vector<double> curriculum_weights(double progress, const std::vector<int> &distances);

/// Draws an index with probability proportional to `weights`.
size_t sample_index(const std::vector<double> &weights, Rng &rng);

/// Per (example, cycle, stabilizer) mask: for a `example_fraction` share of
/// examples, each entry is dropped independently with probability `fraction`.
std::vector<uint8_t> make_input_mask(size_t examples, size_t cycles, size_t stabilizers, double fraction,
                                     double example_fraction, Rng &rng);

struct LossReport {
    std::array<double, kNumHeads> heads{};
    std::array<bool, kNumHeads> present{};
    double total = 0;
    size_t examples = 0;
};

/// Weighted total of per-head mean cross-entropies over the heads present.
LossReport combine_losses(const std::array<double, kNumHeads> &heads, const std::array<bool, kNumHeads> &present,
                          const LossWeights &weights, size_t examples);

/// Simulated examples of one (distance, cycles, p) draw.
struct TrainBatch {
    std::shared_ptr<const ExperimentInfo> info;
    int distance = 3;
    uint32_t cycles = 0;
    double p = 0;
    std::vector<ShotFrames> frames;
    std::vector<uint8_t> observable;
    std::vector<AuxiliaryLabels> aux;  // empty when auxiliary heads are off
    std::vector<uint8_t> mask;         // [example][cycle][stabilizer], empty for none

    size_t size() const {
        return frames.size();
    }
};

TrainBatch make_batch(const Circuit &circuit, size_t examples, uint64_t seed, bool aux, double mask_fraction,
                      double mask_example_fraction);

template <typename T>
struct LossGraph {
    Var total;
    std::array<Var, kNumHeads> heads{};
    std::array<bool, kNumHeads> present{};
};

/// Builds the weighted multi-head loss of a batch on a recording graph.
template <typename T>
LossGraph<T> build_loss(Graph<T> &g, const AqModel<T> &model, const TrainBatch &batch, const LossWeights &weights,
                        bool aux_heads);

class TrainingDiverged : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct TrainProgress {
    uint64_t step = 0;
    uint64_t examples = 0;
    LossReport loss;
    double lr = 0;
    double dev_ler = -1;
};

/// Streams fresh simulated batches through the model with Lion updates.
class Trainer {
   public:
    Trainer(AqModel<float> &model, TrainConfig config);

    /// Runs until total_examples have been seen. `log`, when given, receives one
    /// JSON line per step (and per dev evaluation). Checkpoints are written to
    /// `checkpoint_path` every checkpoint_every examples and at the end.
    void run(std::ostream *log = nullptr, const std::string &checkpoint_path = "");
    /// One optimizer step; returns its report.
    TrainProgress step();
    /// Logical error fraction of the current model on the dev set.
    double dev_error_fraction();

    const TrainProgress &progress() const {
        return progress_;
    }
    const TrainConfig &config() const {
        return config_;
    }
    double learning_rate(size_t stabilizers, uint32_t cycles) const;

    void save(const std::string &path) const;
    /// Restores parameters, optimizer momenta and the step counter.
    void resume(const std::string &path);

   private:
    const Circuit &circuit_for(int distance, uint32_t cycles, double p);
    TrainBatch batch_for_step(uint64_t step);

    AqModel<float> &model_;
    TrainConfig config_;
    TrainProgress progress_;
    std::map<std::tuple<int, uint32_t, double>, Circuit> circuits_;
    std::shared_ptr<ShotTable> dev_;
    std::shared_ptr<const ExperimentInfo> dev_info_;
};

}  // namespace aqlab

#endif
