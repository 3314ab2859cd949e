// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctxtrack/encoder.hpp"
#include "ctxtrack/head.hpp"
#include "ctxtrack/loss.hpp"
#include "ctxtrack/optim.hpp"
#include "ctxtrack/tcm.hpp"

namespace ctxtrack {

struct ModelConfig {
    EncoderConfig encoder;
    int head_hidden = 32;
    int head_depth = 3;
    std::uint64_t init_seed = 0;
};

/// Encoder + head + class embeddings.
class Model {
  public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    const Encoder& encoder() const { return *encoder_; }
    const Head& head() const { return *head_; }
    const ClassEmbeddings& embeddings() const { return embeds_; }

    /// Trainable tensors in checkpoint order.
    NamedTensors named_parameters() const;
    /// Parameters, running statistics, and the architecture as rank-0 entries.
    NamedTensors state() const;
    std::vector<Tensor> backbone_parameters() const;
    std::vector<Tensor> other_parameters() const;

    void save(const std::filesystem::path& path) const;
    static Model load(const std::filesystem::path& path);
    static Model from_state(const NamedTensors& state);

  private:
    ModelConfig cfg_;
    std::shared_ptr<Encoder> encoder_;
    std::shared_ptr<Head> head_;
    ClassEmbeddings embeds_;
};

enum class UpdateMode { Tcm, Template, None };

struct TrackerOptions {
    AttentionMode attention = AttentionMode::Unidirectional;
    UpdateMode update = UpdateMode::Tcm;
    bool autoregressive = true;
    int reset_period = 400;
    int capacity_multiplier = 2;
    int template_interval = 25;
    bool hard_class_scores = false;  // threshold class scores at 0.5 before integration

    void validate() const;
};

std::string to_string(AttentionMode m);
std::string to_string(UpdateMode m);
AttentionMode parse_attention(const std::string& s);
UpdateMode parse_update(const std::string& s);

struct TrackState {
    ReferenceBank bank;
    Tensor initial_tokens;  // template tokens from frame 0, used by template updates
    std::vector<Provenance> initial_provenance;
    int frame_id = 0;
    BBox last_box;
    int reset_period = 400;
    int resets = 0;
    std::uint64_t rng_seed = 0;
};

struct StepResult {
    BBox box;
    double confidence = 0;
    HeadOutput head;
    bool reset = false;
};

/// Template crop window (pixels) centered on `box` and kept inside the frame.
struct CropWindow {
    int x0 = 0;
    int y0 = 0;
    int size = 0;
};
CropWindow template_window(const Image& frame, const BBox& box, int template_size);

/// `box` re-expressed in normalized coordinates of the crop.
BBox box_in_window(const Image& frame, const BBox& box, const CropWindow& win);

/// 1 for cells overlapping the box with positive area, 0 elsewhere.
std::vector<Scalar> box_cell_scores(const BBox& box, const PatchGrid& grid);

/// Frame 0: encode the template crop with no references, add class
/// embeddings from the known box, and seed the bank with the result.
TrackState init(const Model& model, const Image& frame, const BBox& box, const TrackerOptions& opts = {});

/// One autoregressive step: encode against the bank, predict, score the
/// bank, integrate class evidence, update the bank, and apply the reset clock.
StepResult step(const Model& model, TrackState& state, const Image& frame, const TrackerOptions& opts = {},
                bool training = false);

struct TraceRecord {
    int frame_id = 0;
    double confidence = 0;
    int bank_size = 0;
    bool reset = false;
    double latency_ms = 0;
};

struct SequenceResult {
    std::vector<BBox> boxes;  // one per frame after the first
    std::vector<double> confidence;
    std::vector<double> latency_ms;
    std::vector<TraceRecord> trace;
};

using StepObserver = std::function<void(const TrackState&, const StepResult&)>;

SequenceResult run_sequence(const Model& model, const std::vector<Image>& frames, const BBox& init_box,
                            const TrackerOptions& opts = {}, const StepObserver& observer = {});

struct TrainSample {
    Image first_frame;  // template is cropped from here around first_box
    BBox first_box;
    std::vector<Image> search_frames;
    std::vector<BBox> search_boxes;
};

struct TrainHyper {
    double lr_backbone = 4e-5;
    double lr_other = 4e-4;
    double weight_decay = 1e-4;
    LossWeights loss;
};

AdamWState make_optimizer(const Model& model, const TrainHyper& hyper);

/// Unrolls init + the search frames with gradients flowing through the bank,
/// averages total_loss over the search frames, and applies one AdamW update.
/// Returns the loss. Throws NumericError on a non-finite loss.
double train_step(const Model& model, const TrainSample& sample, AdamWState& opt, const TrackerOptions& opts = {},
                  const LossWeights& weights = {});

/// Loss of the same unroll without updating anything (eval-mode head).
double evaluate_sample(const Model& model, const TrainSample& sample, const TrackerOptions& opts = {},
                       const LossWeights& weights = {}, bool training_mode = false);

}  // namespace ctxtrack
