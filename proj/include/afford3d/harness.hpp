#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "afford3d/metrics.hpp"
#include "afford3d/model.hpp"

namespace afford3d {

struct TrainConfig {
    int epochs = 150;
    int batch_size = 16;
    double learning_rate = 0.0005;
    double lambda_c = 0.3;
    uint64_t seed = 0;
    Ablations ablations;
    int scale_large = 64;
    int scale_small = 128;
    int resize_to = 224;
    // model sizing
    int channels = 512;
    int knn_k = 16;
    int heads = 4;
    int gcn_layers = 2;
    int mask_hidden = 128;
    int class_hidden = 128;
    int gate_hidden = 64;
    // optimisation
    double grad_clip = 5.0;
    bool cosine_lr = false;
    int lr_horizon = 0;  // cosine horizon in epochs; 0 means epochs
    int eval_every = 10;
    double focal_gamma = 2.0;
    double focal_alpha = 0.25;
};

ModelConfig model_config(const TrainConfig& cfg);

// flat key=value text; keys match the field names, the two region counts are
// combined as scale_sizes=<large>,<small>. AFFORD3D_SEED overrides the seed.
std::string config_to_text(const TrainConfig& cfg);
TrainConfig config_from_text(const std::string& text);
TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);
void apply_seed_env(TrainConfig& cfg);

struct Checkpoint {
    TrainConfig config;
    int epoch = 0;
    std::vector<std::pair<std::string, Tensor>> params;
    int64_t adam_t = 0;
    std::vector<Tensor> adam_m, adam_v;
};

Checkpoint snapshot(const AffordModel& model, const nn::Adam& adam, const TrainConfig& cfg,
                    int epoch);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::shared_ptr<AffordModel> model_from_checkpoint(const Checkpoint& ckpt);
void restore_optimizer(const Checkpoint& ckpt, nn::Adam& adam);

struct TrainResult {
    std::shared_ptr<AffordModel> model;
    nn::Adam adam;
    TrainConfig config;
    int epochs_run = 0;
    std::vector<double> step_losses;
    std::vector<double> epoch_losses;
};

// Called at the eval cadence; returning true stops training early.
using StopCallback = std::function<bool(int epochs_done, const AffordModel& model)>;

TrainResult train(const TrainConfig& cfg, const DatasetSplit& split,
                  std::ostream* log = nullptr, const StopCallback& should_stop = {});

metrics::MetricReport evaluate(const AffordModel& model,
                               const std::vector<AffordanceSample>& samples);
metrics::MetricReport evaluate(const Checkpoint& ckpt, const DatasetSplit& split);

// forward one (cloud, image) pair and write the colored mask ply plus a
// "label=<argmax>" sidecar at <out_path>.label
void export_prediction(const AffordModel& model, const PointCloud& cloud,
                       const InteractionImage& image, const std::string& out_path);

}  // namespace afford3d
