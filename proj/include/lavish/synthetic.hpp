// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic audio-visual event task and the training loop.
//
// Each sample pairs a frame showing one of two spatial templates with a
// spectrogram showing one of two spectral templates. The event label is
// XNOR(audio class, visual class), so neither stream alone predicts it and a
// head that adds per-stream evidence cannot represent it.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lavish/model.hpp"

namespace lavish {

struct SyntheticAvSample {
    ImageInput image;
    SpectrogramInput spectrogram;
    int audio_class = 0;
    int visual_class = 0;
    int label = 1;
    double noise = 0.0;
};

inline int xnor_label(int audio_class, int visual_class) { return audio_class == visual_class ? 1 : 0; }

struct DatasetShape {
    std::size_t image_height = 16;
    std::size_t image_width = 16;
    std::size_t spec_time = 16;
    std::size_t spec_freq = 16;

    static DatasetShape from(const BackboneConfig& cfg);
};

// Noise-free templates. Visual: class 0 horizontal bars, class 1 vertical
// bars. Audio: class 0 a harmonic comb along frequency, class 1 periodic
// broadband onsets along time.
ImageInput visual_template(int cls, const DatasetShape& shape);
SpectrogramInput audio_template(int cls, const DatasetShape& shape);

// Sample i carries the class pair (i / 2 % 2, i % 2), so every pair appears
// floor or ceil of count / 4 times. Noise is additive N(0, noise); pixels are
// clamped to [0, 1]. Each sample draws from its own (seed, split, i) stream.
// Throws std::invalid_argument if count < 4 or noise is outside [0, 1).
std::vector<SyntheticAvSample> generate_dataset(std::uint64_t seed, std::size_t count, double noise,
                                                const DatasetShape& shape = {}, const std::string& split = "train");

// Binary+JSON export using the tensor container; one tensor per field.
void save_dataset(const std::filesystem::path& stem, const std::vector<SyntheticAvSample>& data);
std::vector<SyntheticAvSample> load_dataset(const std::filesystem::path& path);

struct TrainConfig {
    double lr_adapter = 1e-3;
    double lr_head = 1e-3;
    std::size_t steps = 500;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    // Evaluate on the test split every this many steps; 0 means once per
    // pass over the training set.
    std::size_t eval_every = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    // Recorded with every metrics row.
    FusionMode mode = FusionMode::Bidirectional;
    std::size_t latents = 2;

    void validate() const;
};

// Adam over an explicit parameter list. Only trainable registry entries are
// ever handed to it.
class Adam {
public:
    struct Slot {
        std::string name;
        Tensor param;
        double lr = 0.0;
        std::vector<double> m;
        std::vector<double> v;
    };

    Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void add(std::string name, Tensor param, double lr);
    // Applies one update from the parameters' current gradients; parameters
    // without a gradient are left untouched.
    void step();

    const std::vector<Slot>& slots() const { return slots_; }
    std::size_t steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<Slot> slots_;
};

struct MetricsRow {
    std::size_t step = 0;
    double loss = 0.0;
    std::string split;  // "train" per step, "test" at evaluations
    double accuracy = 0.0;
    FusionMode mode = FusionMode::Bidirectional;
    std::size_t latents = 0;
    std::uint64_t seed = 0;
};

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Mean loss and accuracy without recording history. Ties predict class 0.
Evaluation evaluate(const LavishModel& model, const std::vector<SyntheticAvSample>& data);

struct TrainResult {
    std::vector<MetricsRow> history;
    std::size_t optimizer_slots = 0;
    std::vector<std::string> optimizer_names;

    double final_accuracy() const;
};

// Trains the registry's trainable tensors with Adam. Tensors named "head.*"
// use lr_head, all others lr_adapter. Throws std::logic_error if any frozen
// tensor ever receives a gradient.
TrainResult train(LavishModel& model, const std::vector<SyntheticAvSample>& train_set,
                  const std::vector<SyntheticAvSample>& test_set, const TrainConfig& cfg);

// "step,loss,split,accuracy,mode,m,seed" with 17 significant digits.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

// 17 significant digits, general notation, "." separator.
std::string format_double(double v);

}  // namespace lavish
