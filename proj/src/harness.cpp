#include "afford3d/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "afford3d/ply.hpp"

namespace afford3d {

ModelConfig model_config(const TrainConfig& cfg) {
    ModelConfig m;
    m.channels = cfg.channels;
    m.heads = cfg.heads;
    m.scale_large = cfg.scale_large;
    m.scale_small = cfg.scale_small;
    m.knn_k = cfg.knn_k;
    m.gcn_layers = cfg.gcn_layers;
    m.resize_to = cfg.resize_to;
    m.mask_hidden = cfg.mask_hidden;
    m.class_hidden = cfg.class_hidden;
    m.gate_hidden = cfg.gate_hidden;
    m.ablations = cfg.ablations;
    m.seed = cfg.seed;
    return m;
}

namespace {

std::string bool_text(bool v) { return v ? "on" : "off"; }

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw std::runtime_error("config: bad boolean for " + key + ": " + v);
}

}  // namespace

std::string config_to_text(const TrainConfig& c) {
    std::ostringstream out;
    out << "epochs=" << c.epochs << "\n";
    out << "batch_size=" << c.batch_size << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", c.learning_rate);
    out << "learning_rate=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.lambda_c);
    out << "lambda_c=" << buf << "\n";
    out << "seed=" << c.seed << "\n";
    out << "msi=" << bool_text(c.ablations.msi) << "\n";
    out << "gfpm=" << bool_text(c.ablations.gfpm) << "\n";
    out << "cgc=" << bool_text(c.ablations.cgc) << "\n";
    out << "sg=" << bool_text(c.ablations.sg) << "\n";
    out << "scale_sizes=" << c.scale_large << "," << c.scale_small << "\n";
    out << "resize_to=" << c.resize_to << "\n";
    out << "channels=" << c.channels << "\n";
    out << "knn_k=" << c.knn_k << "\n";
    out << "heads=" << c.heads << "\n";
    out << "gcn_layers=" << c.gcn_layers << "\n";
    out << "mask_hidden=" << c.mask_hidden << "\n";
    out << "class_hidden=" << c.class_hidden << "\n";
    out << "gate_hidden=" << c.gate_hidden << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.grad_clip);
    out << "grad_clip=" << buf << "\n";
    out << "cosine_lr=" << bool_text(c.cosine_lr) << "\n";
    out << "lr_horizon=" << c.lr_horizon << "\n";
    out << "eval_every=" << c.eval_every << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.focal_gamma);
    out << "focal_gamma=" << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.focal_alpha);
    out << "focal_alpha=" << buf << "\n";
    return out.str();
}

TrainConfig config_from_text(const std::string& text) {
    TrainConfig c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: malformed line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "epochs")
            c.epochs = std::stoi(value);
        else if (key == "batch_size")
            c.batch_size = std::stoi(value);
        else if (key == "learning_rate")
            c.learning_rate = std::stod(value);
        else if (key == "lambda_c")
            c.lambda_c = std::stod(value);
        else if (key == "seed")
            c.seed = std::stoull(value);
        else if (key == "msi")
            c.ablations.msi = parse_bool(value, key);
        else if (key == "gfpm")
            c.ablations.gfpm = parse_bool(value, key);
        else if (key == "cgc")
            c.ablations.cgc = parse_bool(value, key);
        else if (key == "sg")
            c.ablations.sg = parse_bool(value, key);
        else if (key == "scale_sizes") {
            const auto comma = value.find(',');
            if (comma == std::string::npos)
                throw std::runtime_error("config: scale_sizes expects <large>,<small>");
            c.scale_large = std::stoi(value.substr(0, comma));
            c.scale_small = std::stoi(value.substr(comma + 1));
        } else if (key == "resize_to")
            c.resize_to = std::stoi(value);
        else if (key == "channels")
            c.channels = std::stoi(value);
        else if (key == "knn_k")
            c.knn_k = std::stoi(value);
        else if (key == "heads")
            c.heads = std::stoi(value);
        else if (key == "gcn_layers")
            c.gcn_layers = std::stoi(value);
        else if (key == "mask_hidden")
            c.mask_hidden = std::stoi(value);
        else if (key == "class_hidden")
            c.class_hidden = std::stoi(value);
        else if (key == "gate_hidden")
            c.gate_hidden = std::stoi(value);
        else if (key == "grad_clip")
            c.grad_clip = std::stod(value);
        else if (key == "cosine_lr")
            c.cosine_lr = parse_bool(value, key);
        else if (key == "lr_horizon")
            c.lr_horizon = std::stoi(value);
        else if (key == "eval_every")
            c.eval_every = std::stoi(value);
        else if (key == "focal_gamma")
            c.focal_gamma = std::stod(value);
        else if (key == "focal_alpha")
            c.focal_alpha = std::stod(value);
        else
            throw std::runtime_error("config: unknown key '" + key + "'");
    }
    if (c.epochs <= 0 || c.batch_size <= 0 || c.learning_rate <= 0.0 || c.lambda_c < 0.0)
        throw std::runtime_error("config: values must be positive (lambda_c may be 0)");
    return c;
}

void apply_seed_env(TrainConfig& cfg) {
    if (const char* env = std::getenv("AFFORD3D_SEED")) cfg.seed = std::stoull(env);
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    TrainConfig cfg = config_from_text(ss.str());
    apply_seed_env(cfg);
    return cfg;
}

void save_config(const TrainConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config " + path);
    out << config_to_text(cfg);
}

// --------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'A', 'F', 'F', '3', 'D', 'C', 'K', '1'};

void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    write_u64(out, t.shape().size());
    for (const int d : t.shape()) write_u64(out, static_cast<uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

Tensor read_tensor(std::istream& in) {
    const uint64_t rank = read_u64(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u64(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    return t;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const uint64_t len = read_u64(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

}  // namespace

Checkpoint snapshot(const AffordModel& model, const nn::Adam& adam, const TrainConfig& cfg,
                    int epoch) {
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.epoch = epoch;
    for (const auto& p : model.params()) ckpt.params.emplace_back(p.name, p.var.val());
    ckpt.adam_t = adam.t;
    ckpt.adam_m = adam.m;
    ckpt.adam_v = adam.v;
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    write_string(out, config_to_text(ckpt.config));
    write_u64(out, static_cast<uint64_t>(ckpt.epoch));
    write_u64(out, ckpt.params.size());
    for (const auto& [name, tensor] : ckpt.params) {
        write_string(out, name);
        write_tensor(out, tensor);
    }
    write_u64(out, static_cast<uint64_t>(ckpt.adam_t));
    write_u64(out, ckpt.adam_m.size());
    for (const auto& t : ckpt.adam_m) write_tensor(out, t);
    for (const auto& t : ckpt.adam_v) write_tensor(out, t);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error(path + ": not an afford3d checkpoint");
    Checkpoint ckpt;
    ckpt.config = config_from_text(read_string(in));
    ckpt.epoch = static_cast<int>(read_u64(in));
    const uint64_t n_params = read_u64(in);
    for (uint64_t i = 0; i < n_params; ++i) {
        std::string name = read_string(in);
        Tensor t = read_tensor(in);
        ckpt.params.emplace_back(std::move(name), std::move(t));
    }
    ckpt.adam_t = static_cast<int64_t>(read_u64(in));
    const uint64_t n_state = read_u64(in);
    for (uint64_t i = 0; i < n_state; ++i) ckpt.adam_m.push_back(read_tensor(in));
    for (uint64_t i = 0; i < n_state; ++i) ckpt.adam_v.push_back(read_tensor(in));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    return ckpt;
}

std::shared_ptr<AffordModel> model_from_checkpoint(const Checkpoint& ckpt) {
    auto model = std::make_shared<AffordModel>(model_config(ckpt.config));
    auto params = model->params();
    if (params.size() != ckpt.params.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != ckpt.params[i].first)
            throw std::runtime_error("checkpoint: parameter name mismatch at " +
                                     params[i].name);
        if (!params[i].var.val().same_shape(ckpt.params[i].second))
            throw std::runtime_error("checkpoint: shape mismatch at " + params[i].name);
        params[i].var.val() = ckpt.params[i].second;
    }
    return model;
}

void restore_optimizer(const Checkpoint& ckpt, nn::Adam& adam) {
    adam.t = ckpt.adam_t;
    adam.m = ckpt.adam_m;
    adam.v = ckpt.adam_v;
}

// ------------------------------------------------------------------ training

TrainResult train(const TrainConfig& cfg, const DatasetSplit& split, std::ostream* log,
                  const StopCallback& should_stop) {
    if (split.train.empty()) throw std::runtime_error("train: empty train split");

    TrainResult result;
    result.config = cfg;
    result.model = std::make_shared<AffordModel>(model_config(cfg));
    auto params = result.model->params();
    result.adam.lr = cfg.learning_rate;
    result.adam.reset(params);
    const FocalConfig focal{cfg.focal_gamma, cfg.focal_alpha, 1e-6};

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.cosine_lr) {
            const int horizon = cfg.lr_horizon > 0 ? cfg.lr_horizon : cfg.epochs;
            const double phase = std::min(epoch, horizon) * M_PI / horizon;
            result.adam.lr = cfg.learning_rate * 0.5 * (1.0 + std::cos(phase));
        }

        auto pairs =
            pair_for_training(split, seed_for(cfg.seed, "pairs.epoch." + std::to_string(epoch)));
        Rng shuffle_rng(seed_for(cfg.seed, "shuffle.epoch." + std::to_string(epoch)));
        shuffle_rng.shuffle(pairs);

        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
            const size_t end = std::min(pairs.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            nn::zero_grads(params);
            double batch_loss = 0.0;
            for (size_t k = start; k < end; ++k) {
                const auto& [ci, ii] = pairs[k];
                const AffordanceSample& cloud_sample = split.train[ci];
                const AffordanceSample& image_sample = split.train[ii];
                const Prediction pred =
                    result.model->forward(cloud_sample.cloud, image_sample.image);
                const LossReport report = total_loss(pred, cloud_sample, cfg.lambda_c, focal);
                if (!std::isfinite(report.total))
                    throw std::runtime_error(
                        "train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                        std::to_string(batches) + " sample " + cloud_sample.id);
                ag::backward(ag::scale(report.total_var, inv));
                batch_loss += report.total * inv;
            }
            nn::clip_grad_norm(params, cfg.grad_clip);
            result.adam.step(params);
            result.step_losses.push_back(batch_loss);
            epoch_loss += batch_loss;
            ++batches;
        }
        epoch_loss /= std::max(1, batches);
        result.epoch_losses.push_back(epoch_loss);
        result.epochs_run = epoch + 1;
        if (log)
            (*log) << "epoch " << (epoch + 1) << "/" << cfg.epochs << " loss " << epoch_loss
                   << "\n";

        const bool at_cadence = ((epoch + 1) % cfg.eval_every == 0) || epoch + 1 == cfg.epochs;
        if (at_cadence && should_stop && should_stop(epoch + 1, *result.model)) break;
    }
    return result;
}

metrics::MetricReport evaluate(const AffordModel& model,
                               const std::vector<AffordanceSample>& samples) {
    ag::NoGradGuard guard;
    metrics::MetricAccumulator acc;
    for (const auto& s : samples) {
        const Prediction pred = model.forward(s.cloud, s.image);
        std::vector<double> mask(pred.mask.val().numel());
        for (size_t i = 0; i < mask.size(); ++i) mask[i] = pred.mask.val()[i];
        acc.add(mask, s.gt_mask, pred.predicted_label(), s.label);
    }
    return acc.report();
}

metrics::MetricReport evaluate(const Checkpoint& ckpt, const DatasetSplit& split) {
    if (static_cast<int>(split.affordances.size()) != kNumAffordances)
        throw std::runtime_error("evaluate: affordance vocabulary mismatch (split has " +
                                 std::to_string(split.affordances.size()) + ", checkpoint has " +
                                 std::to_string(kNumAffordances) + " classes)");
    const auto model = model_from_checkpoint(ckpt);
    return evaluate(*model, split.test);
}

void export_prediction(const AffordModel& model, const PointCloud& cloud,
                       const InteractionImage& image, const std::string& out_path) {
    ag::NoGradGuard guard;
    const Prediction pred = model.forward(cloud, image);
    std::vector<double> mask(pred.mask.val().numel());
    for (size_t i = 0; i < mask.size(); ++i) mask[i] = pred.mask.val()[i];
    write_mask_ply(out_path, cloud.coords, mask);
    std::ofstream side(out_path + ".label");
    if (!side) throw std::runtime_error("cannot write " + out_path + ".label");
    side << "label=" << pred.predicted_label() << "\n";
}

}  // namespace afford3d
