// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include "lavish/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lavish/rng.hpp"
#include "lavish/tensor_io.hpp"

namespace lavish {

DatasetShape DatasetShape::from(const BackboneConfig& cfg) {
    return {cfg.image_height, cfg.image_width, cfg.spec_time, cfg.spec_freq};
}

ImageInput visual_template(int cls, const DatasetShape& shape) {
    ImageInput img{shape.image_height, shape.image_width, {}};
    img.pixels.resize(img.height * img.width * 3);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const std::size_t coord = cls == 0 ? y : x;
            const double v = (coord / 2) % 2 == 0 ? 0.8 : 0.2;
            for (std::size_t c = 0; c < 3; ++c) img.pixels[(y * img.width + x) * 3 + c] = v;
        }
    }
    return img;
}

SpectrogramInput audio_template(int cls, const DatasetShape& shape) {
    SpectrogramInput s{shape.spec_time, shape.spec_freq, {}};
    s.values.resize(s.time_bins * s.freq_bins);
    for (std::size_t t = 0; t < s.time_bins; ++t) {
        for (std::size_t f = 0; f < s.freq_bins; ++f) {
            const bool on = cls == 0 ? f % 4 == 0 : t % 4 == 0;
            s.values[t * s.freq_bins + f] = on ? 1.0 : 0.0;
        }
    }
    return s;
}

std::vector<SyntheticAvSample> generate_dataset(std::uint64_t seed, std::size_t count, double noise,
                                                const DatasetShape& shape, const std::string& split) {
    if (count < 4) throw std::invalid_argument("count must be at least 4");
    if (!(noise >= 0.0 && noise < 1.0)) throw std::invalid_argument("noise must lie in [0, 1)");
    const ImageInput vt[2] = {visual_template(0, shape), visual_template(1, shape)};
    const SpectrogramInput at[2] = {audio_template(0, shape), audio_template(1, shape)};
    const std::uint64_t split_stream = fnv1a64("dataset." + split);

    std::vector<SyntheticAvSample> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        SyntheticAvSample& s = out[i];
        s.audio_class = static_cast<int>((i / 2) % 2);
        s.visual_class = static_cast<int>(i % 2);
        s.label = xnor_label(s.audio_class, s.visual_class);
        s.noise = noise;
        s.image = vt[s.visual_class];
        s.spectrogram = at[s.audio_class];
        if (noise > 0.0) {
            Rng rng(seed, split_stream + i);
            for (double& p : s.image.pixels) p = std::clamp(p + noise * rng.normal(), 0.0, 1.0);
            for (double& v : s.spectrogram.values) v += noise * rng.normal();
        }
    }
    return out;
}

void save_dataset(const std::filesystem::path& stem, const std::vector<SyntheticAvSample>& data) {
    if (data.empty()) throw std::invalid_argument("save_dataset: empty dataset");
    const auto& img0 = data.front().image;
    const auto& spec0 = data.front().spectrogram;
    const std::size_t n = data.size();
    std::vector<double> images, specs, classes;
    images.reserve(n * img0.pixels.size());
    specs.reserve(n * spec0.values.size());
    classes.reserve(n * 3);
    for (const auto& s : data) {
        if (s.image.pixels.size() != img0.pixels.size() || s.spectrogram.values.size() != spec0.values.size()) {
            throw std::invalid_argument("save_dataset: samples differ in shape");
        }
        images.insert(images.end(), s.image.pixels.begin(), s.image.pixels.end());
        specs.insert(specs.end(), s.spectrogram.values.begin(), s.spectrogram.values.end());
        classes.push_back(s.audio_class);
        classes.push_back(s.visual_class);
        classes.push_back(s.label);
    }
    TensorFile f;
    f.tensors.push_back({"images", Tensor::from({n, img0.height, img0.width, 3}, std::move(images)), true});
    f.tensors.push_back({"spectrograms", Tensor::from({n, spec0.time_bins, spec0.freq_bins}, std::move(specs)), true});
    f.tensors.push_back({"classes", Tensor::from({n, 3}, std::move(classes)), true});
    f.meta["kind"] = "synthetic-av-dataset";
    f.meta["noise"] = data.front().noise;
    save_tensor_file(stem, f);
}

std::vector<SyntheticAvSample> load_dataset(const std::filesystem::path& path) {
    const TensorFile f = load_tensor_file(path);
    const NamedTensor* images = f.find("images");
    const NamedTensor* specs = f.find("spectrograms");
    const NamedTensor* classes = f.find("classes");
    if (!images || !specs || !classes) throw std::runtime_error("load_dataset: missing images, spectrograms or classes");
    const Shape& is = images->tensor.shape();
    const Shape& ss = specs->tensor.shape();
    const Shape& cs = classes->tensor.shape();
    if (is.size() != 4 || is[3] != 3 || ss.size() != 3 || cs.size() != 2 || cs[1] != 3 || is[0] != ss[0] ||
        is[0] != cs[0]) {
        throw std::runtime_error("load_dataset: inconsistent tensor shapes");
    }
    const double noise = f.meta.value("noise", 0.0);
    const std::size_t n = is[0], ipx = is[1] * is[2] * 3, spx = ss[1] * ss[2];
    std::vector<SyntheticAvSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = out[i];
        s.image = {is[1], is[2], {images->tensor.data().begin() + i * ipx, images->tensor.data().begin() + (i + 1) * ipx}};
        s.spectrogram = {ss[1], ss[2], {specs->tensor.data().begin() + i * spx, specs->tensor.data().begin() + (i + 1) * spx}};
        s.audio_class = static_cast<int>(classes->tensor.at(i, 0));
        s.visual_class = static_cast<int>(classes->tensor.at(i, 1));
        s.label = static_cast<int>(classes->tensor.at(i, 2));
        s.noise = noise;
        if (s.label != xnor_label(s.audio_class, s.visual_class)) {
            throw std::runtime_error("load_dataset: sample " + std::to_string(i) + " has an inconsistent label");
        }
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(lr_adapter >= 0.0) || !std::isfinite(lr_adapter)) throw std::invalid_argument("lr_adapter must be finite and >= 0");
    if (!(lr_head >= 0.0) || !std::isfinite(lr_head)) throw std::invalid_argument("lr_head must be finite and >= 0");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
}

void Adam::add(std::string name, Tensor param, double lr) {
    if (!param.requires_grad()) throw std::logic_error("Adam: " + name + " is not trainable");
    const std::size_t n = param.numel();
    slots_.push_back({std::move(name), std::move(param), lr, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Slot& s : slots_) {
        if (!s.param.has_grad()) continue;
        const auto g = s.param.grad();
        auto p = s.param.mutable_data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
            s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = s.m[i] / c1;
            const double vhat = s.v[i] / c2;
            p[i] -= s.lr * (mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

namespace {

int argmax_row(const Tensor& logits) {
    const auto v = logits.data();
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

Tensor batch_logits(const LavishModel& model, const std::vector<SyntheticAvSample>& data,
                    const std::vector<std::size_t>& idx) {
    std::vector<Tensor> rows;
    rows.reserve(idx.size());
    for (std::size_t i : idx) rows.push_back(model.logits(data[i].image, data[i].spectrogram));
    return concat_rows(rows);
}

void check_frozen_clean(const FreezeRegistry& reg) {
    for (const auto& e : reg.entries()) {
        if (e.frozen && (e.tensor.requires_grad() || e.tensor.has_grad())) {
            throw std::logic_error("gradient reached frozen parameter " + e.name);
        }
    }
}

}  // namespace

Evaluation evaluate(const LavishModel& model, const std::vector<SyntheticAvSample>& data) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    NoGradGuard guard;
    double loss = 0.0;
    std::size_t correct = 0;
    for (const auto& s : data) {
        const Tensor lg = model.logits(s.image, s.spectrogram);
        const int label = s.label;
        loss += cross_entropy(lg, std::span<const int>(&label, 1)).item();
        if (argmax_row(lg) == s.label) ++correct;
    }
    const double n = static_cast<double>(data.size());
    return {loss / n, static_cast<double>(correct) / n};
}

double TrainResult::final_accuracy() const {
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        if (it->split == "test") return it->accuracy;
    }
    throw std::logic_error("final_accuracy: no evaluation recorded");
}

TrainResult train(LavishModel& model, const std::vector<SyntheticAvSample>& train_set,
                  const std::vector<SyntheticAvSample>& test_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty() || test_set.empty()) throw std::invalid_argument("train: empty split");
    const FreezeRegistry& reg = model.registry();
    check_frozen_clean(reg);

    Adam opt(cfg.beta1, cfg.beta2, cfg.eps);
    for (const auto& e : reg.trainable()) {
        opt.add(e.name, e.tensor, e.name.rfind("head.", 0) == 0 ? cfg.lr_head : cfg.lr_adapter);
    }
    TrainResult result;
    result.optimizer_slots = opt.slots().size();
    for (const auto& s : opt.slots()) result.optimizer_names.push_back(s.name);

    const std::size_t batch = std::min(cfg.batch_size, train_set.size());
    const std::size_t per_epoch = std::max<std::size_t>(1, train_set.size() / batch);
    const std::size_t eval_every = cfg.eval_every ? cfg.eval_every : per_epoch;

    auto record_eval = [&](std::size_t step) {
        const Evaluation ev = evaluate(model, test_set);
        result.history.push_back({step, ev.loss, "test", ev.accuracy, cfg.mode, cfg.latents, cfg.seed});
    };
    record_eval(0);
    if (cfg.steps == 0) return result;
    if (opt.slots().empty()) throw std::invalid_argument("train: model has no trainable parameters");

    Rng order_rng(cfg.seed, "train.order");
    std::vector<std::size_t> order(train_set.size());
    std::size_t cursor = order.size();
    std::vector<int> labels(batch);
    std::vector<std::size_t> idx(batch);

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                for (std::size_t i = order.size() - 1; i > 0; --i) {
                    std::swap(order[i], order[order_rng.next_u64() % (i + 1)]);
                }
                cursor = 0;
            }
            idx[b] = order[cursor++];
            labels[b] = train_set[idx[b]].label;
        }
        const Tensor logits = batch_logits(model, train_set, idx);
        const Tensor loss = cross_entropy(logits, labels);
        backward(loss);
        check_frozen_clean(reg);

        std::size_t correct = 0;
        for (std::size_t b = 0; b < batch; ++b) {
            const auto row = logits.data().subspan(b * logits.cols(), logits.cols());
            const int pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
            if (pred == labels[b]) ++correct;
        }
        opt.step();
        reg.zero_grad();
        result.history.push_back({step, loss.item(), "train", static_cast<double>(correct) / static_cast<double>(batch),
                                  cfg.mode, cfg.latents, cfg.seed});
        if (step % eval_every == 0 || step == cfg.steps) record_eval(step);
    }
    return result;
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "step,loss,split,accuracy,mode,m,seed\n";
    for (const auto& r : rows) {
        out += std::to_string(r.step);
        out += ',';
        out += format_double(r.loss);
        out += ',';
        out += r.split;
        out += ',';
        out += format_double(r.accuracy);
        out += ',';
        out += fusion_mode_name(r.mode);
        out += ',';
        out += std::to_string(r.latents);
        out += ',';
        out += std::to_string(r.seed);
        out += '\n';
    }
    return out;
}

}  // namespace lavish
