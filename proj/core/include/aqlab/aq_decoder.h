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

#ifndef AQLAB_AQ_DECODER_H
#define AQLAB_AQ_DECODER_H

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "aqlab/circuit.h"
#include "aqlab/decoder.h"
#include "aqlab/nn.h"
#include "aqlab/params.h"
#include "aqlab/sim.h"

namespace aqlab {

enum class LayerKind : uint8_t { Rnn, RnnGated, Transformer };
std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);

struct ModelConfig {
    CodeKind code = CodeKind::Surface;
    size_t channels = 64;
    size_t heads = 4;
    size_t key_size = 16;
    size_t widening = 4;
    std::vector<LayerKind> layers{LayerKind::RnnGated, LayerKind::Transformer, LayerKind::Transformer,
                                  LayerKind::RnnGated};
    size_t group = 6;         // cycles per temporal step
    size_t block = 24;        // temporal steps per streamed block
    size_t readout_layers = 1;  // cross-attention layers in the readout
    size_t num_observables = 1;

    /// Workstation-sized defaults (g = 6 for surface, 3 for colour).
    static ModelConfig desk(CodeKind code);
    void validate() const;
    /// Per-stabilizer input width of one temporal step: 4 channels per cycle
    /// (event, measurement, flag, terminal marker).
    size_t input_width() const {
        return 4 * group;
    }
    size_t num_recurrent() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string &text);
    bool operator==(const ModelConfig &) const = default;
};

/// Per-shot detection events rearranged per cycle and stabilizer.
struct ShotFrames {
    uint32_t cycles = 0;
    size_t stabilizers = 0;
    std::vector<uint8_t> events;    // [cycle][stabilizer]
    std::vector<uint8_t> flags;     // [cycle][stabilizer]
    std::vector<uint8_t> terminal;  // [stabilizer]
};

/// Maps detectors of a memory experiment onto the network input layout.
class ShotEncoder {
   public:
    ShotEncoder(std::shared_ptr<const ExperimentInfo> info, size_t group);

    size_t stabilizers() const {
        return stabilizers_;
    }
    uint32_t cycles() const {
        return cycles_;
    }
    size_t group() const {
        return group_;
    }
    /// Temporal steps before the terminal one: ceil(cycles / group).
    size_t num_groups() const {
        return (cycles_ + group_ - 1) / group_;
    }
    /// Last cycle contained in step k.
    uint32_t last_cycle(size_t k) const;
    const ExperimentInfo &info() const {
        return *info_;
    }

    ShotFrames frames(const uint64_t *detector_row) const;
    ShotFrames frames(const BitVec &events) const;
    /// Terminal events of a fake ending (bits over info().terminal_stabilizers).
    std::vector<uint8_t> terminal_from_bits(const BitVec &bits) const;

    /// Writes the [stabilizers x input_width] rows of step k. `running` holds
    /// the per-stabilizer XOR of all earlier events and is advanced. `mask`,
    /// when given, is indexed [cycle][stabilizer]; nonzero entries are zeroed.
    template <typename T>
    void write_group(const ShotFrames &f, size_t k, std::vector<uint8_t> &running, T *out,
                     const uint8_t *mask = nullptr) const;
    /// Writes the terminal step given terminal events and the running XOR.
    template <typename T>
    void write_terminal(const std::vector<uint8_t> &terminal, const std::vector<uint8_t> &running, T *out) const;

   private:
    std::shared_ptr<const ExperimentInfo> info_;
    size_t group_;
    size_t stabilizers_;
    uint32_t cycles_;
    struct Target {
        uint32_t cycle;
        uint32_t slot;
        uint8_t kind;  // 0 event, 1 flag, 2 terminal
    };
    std::vector<Target> targets_;  // per detector
};

/// Positions and rotary tables for one code patch.
template <typename T>
struct Geometry {
    size_t stabilizers = 0;
    Tensor<T> positions;  // [S x 2]
    Tensor<T> basis;      // [S x 2] one-hot stabilizer basis
    RopeTable<T> rope;
};
template <typename T>
Geometry<T> make_geometry(const QubitLayout &layout, const ModelConfig &config);

/// The recurrent-transformer decoder: parameters plus graph builders.
template <typename T>
class AqModel {
   public:
    AqModel(ModelConfig config, uint64_t seed);
    AqModel(ModelConfig config, ParameterStore<T> params);

    const ModelConfig &config() const {
        return config_;
    }
    ParameterStore<T> &params() const {
        return params_;
    }

    /// inputs: [rows x input_width] where rows = steps * S. Returns [rows x C].
    Var embed(Graph<T> &g, Var inputs, const Geometry<T> &geo) const;
    /// (new state, output) for recurrent layer `layer`.
    std::pair<Var, Var> rnn_step(Graph<T> &g, size_t layer, Var state, Var x) const;
    /// Elementwise part of the gated recurrence: new state from block input and state.
    Var gated_recurrence(Graph<T> &g, size_t layer, Var x, Var state) const;
    /// x: [groups * S x C].
    Var transformer(Graph<T> &g, size_t layer, Var x, size_t groups, const Geometry<T> &geo) const;
    /// rep: [groups * S x C] -> logits [groups * num_observables x 2]. Column 0
    /// is the observable, column 1 the auxiliary delta head.
    Var readout(Graph<T> &g, Var rep, size_t groups, size_t stabilizers) const;

    struct StackOutput {
        std::vector<Var> outputs;              // per step, [rows x C]
        std::vector<std::vector<Var>> states;  // per step, per recurrent layer (when kept)
        std::vector<Var> final_states;
    };
    /// Runs the layer sequence over consecutive steps (each [batch * S x C]),
    /// starting from `states` (one per recurrent layer).
    StackOutput run_stack(Graph<T> &g, std::vector<Var> states, std::vector<Var> steps, size_t stabilizers,
                          const Geometry<T> &geo, bool keep_states) const;

   private:
    void init(uint64_t seed);
    Var p(Graph<T> &g, const std::string &name) const {
        return g.param(params_.get(name));
    }

    ModelConfig config_;
    mutable ParameterStore<T> params_;
};

/// Constant-size state carried between streamed blocks.
template <typename T>
struct DecoderState {
    size_t batch = 1;
    std::vector<Tensor<T>> layers;            // per recurrent layer [batch * S x C]
    std::vector<std::vector<uint8_t>> running;  // per shot, per stabilizer XOR of events
    uint64_t steps = 0;
    size_t bytes() const;
};

/// Blocked streaming execution of a model on one experiment geometry.
template <typename T>
class StreamingDecoder {
   public:
    StreamingDecoder(const AqModel<T> &model, std::shared_ptr<const ExperimentInfo> info);

    const ShotEncoder &encoder() const {
        return encoder_;
    }
    const Geometry<T> &geometry() const {
        return geo_;
    }
    DecoderState<T> initial_state(size_t batch = 1) const;
    /// Processes up to block-size steps; each input is [batch * S x input_width].
    void process_block(DecoderState<T> &state, const std::vector<Tensor<T>> &steps) const;
    /// Terminal step and readout; probabilities per shot and observable.
    std::vector<T> finish(const DecoderState<T> &state, const Tensor<T> &terminal) const;

    /// Decodes one shot in blocks of `block` steps (0 = model default).
    /// `block_seconds`, when given, receives the wall time of every block.
    T probability(const BitVec &events, size_t block = 0, std::vector<double> *block_seconds = nullptr) const;
    /// Whole-sequence evaluation of shots [begin, begin + count) of a table, batched.
    std::vector<T> probabilities(const ShotTable &shots, size_t begin, size_t count) const;

   private:
    const AqModel<T> &model_;
    ShotEncoder encoder_;
    Geometry<T> geo_;
};

/// Decoder interface adapter around an ensemble of models (mean probability,
/// predict 1 only when it exceeds 0.5).
class AqDecoder : public Decoder {
   public:
    AqDecoder(std::vector<std::shared_ptr<const AqModel<float>>> models, std::shared_ptr<const ExperimentInfo> info);

    DecodeResult decode(const BitVec &detection_events) const override;
    size_t num_observables() const override;
    std::string name() const override {
        return "aq";
    }
    double probability(const BitVec &detection_events) const;
    /// Batched predictions for every shot of a table (one byte per shot, bit k = observable k).
    std::vector<uint8_t> predict_table(const ShotTable &shots, size_t batch = 256) const;

   private:
    std::vector<std::shared_ptr<const AqModel<float>>> models_;
    std::vector<StreamingDecoder<float>> streams_;
};

/// Mean of per-model probabilities.
double ensemble_probability(const std::vector<double> &probabilities);
inline bool threshold_prediction(double probability) {
    return probability > 0.5;
}

/// Model config and parameters stored in one checkpoint.
void save_model(const std::string &path, const AqModel<float> &model, const std::string &extra_metadata = "{}");
std::shared_ptr<AqModel<float>> load_model(const std::string &path);

}  // namespace aqlab

#endif
