#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "afford3d/harness.hpp"
#include "afford3d/ply.hpp"

namespace fs = std::filesystem;
using namespace afford3d;

namespace {

TrainConfig resolve_config(const std::string& config_path) {
    if (!config_path.empty()) return load_config(config_path);
    TrainConfig cfg;
    apply_seed_env(cfg);
    return cfg;
}

InteractionImage image_from_files(const std::string& image_path, const std::string& meta_path) {
    InteractionImage img;
    img.pixels = read_ppm(image_path);
    const int h = img.height(), w = img.width();
    if (!meta_path.empty()) {
        std::ifstream meta(meta_path);
        if (!meta) throw std::runtime_error("cannot open " + meta_path);
        std::string line;
        bool have_sub = false, have_obj = false;
        while (std::getline(meta, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(0, eq);
            std::array<int, 4> box{};
            if (key == "box_subject" || key == "box_object") {
                if (std::sscanf(line.substr(eq + 1).c_str(), "%d,%d,%d,%d", &box[0], &box[1],
                                &box[2], &box[3]) != 4)
                    throw std::runtime_error(meta_path + ": malformed " + key);
                (key == "box_subject" ? img.box_subject : img.box_object) = box;
                (key == "box_subject" ? have_sub : have_obj) = true;
            }
        }
        if (!have_sub || !have_obj)
            throw std::runtime_error(meta_path + ": needs box_subject and box_object");
    } else {
        // no annotation: assume the object fills the right 3/4 and a subject
        // occupies the top-left corner
        img.box_object = {w / 4, h / 4, w, h};
        img.box_subject = {0, 0, w / 4, h / 4};
    }
    img.scene_mask = scene_mask_from_boxes(h, w, img.box_subject, img.box_object);
    return img;
}

int cmd_train(const std::string& config_path, const std::string& data_root,
              const std::string& out_dir, const std::string& setting) {
    TrainConfig cfg = resolve_config(config_path);
    const DatasetSplit split = load_piad(data_root, setting_from_name(setting), 0);
    fs::create_directories(out_dir);

    std::ofstream log(fs::path(out_dir) / "train_log.txt");
    struct Tee : std::ostream, std::streambuf {
        std::ostream &a, &b;
        Tee(std::ostream& a_, std::ostream& b_) : std::ostream(this), a(a_), b(b_) {}
        int overflow(int c) override {
            a.put(static_cast<char>(c));
            b.put(static_cast<char>(c));
            return c;
        }
    } tee(std::cout, log);

    const TrainResult result = train(cfg, split, &tee);
    save_config(cfg, (fs::path(out_dir) / "config.txt").string());
    const Checkpoint ckpt = snapshot(*result.model, result.adam, cfg, result.epochs_run);
    save_checkpoint(ckpt, (fs::path(out_dir) / "checkpoint.bin").string());

    if (!split.test.empty()) {
        const auto report = evaluate(*result.model, split.test);
        std::cout << report.to_text();
        metrics::write_report(report, (fs::path(out_dir) / "report.txt").string());
    }
    std::cout << "checkpoint written to " << (fs::path(out_dir) / "checkpoint.bin").string()
              << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_root,
             const std::string& setting, const std::string& report_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const DatasetSplit split = load_piad(data_root, setting_from_name(setting), 0);
    const auto report = evaluate(ckpt, split);
    std::cout << report.to_text();
    if (!report_path.empty()) metrics::write_report(report, report_path);
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& cloud_path,
                const std::string& image_path, const std::string& meta_path,
                const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto model = model_from_checkpoint(ckpt);
    PointCloud cloud;
    cloud.coords = read_xyz(cloud_path);
    normalize_cloud(cloud);
    const InteractionImage image = image_from_files(image_path, meta_path);
    export_prediction(*model, cloud, image, out_path);
    std::cout << "wrote " << out_path << " and " << out_path << ".label\n";
    return 0;
}

int cmd_sweep(const std::string& values, const std::string& config_path,
              const std::string& data_root, const std::string& out_dir,
              const std::string& setting) {
    std::vector<double> lambdas;
    std::stringstream ss(values);
    std::string tok;
    while (std::getline(ss, tok, ',')) lambdas.push_back(std::stod(tok));
    if (lambdas.empty()) throw std::runtime_error("sweep-lambda: no values given");

    TrainConfig base = resolve_config(config_path);
    const DatasetSplit split = load_piad(data_root, setting_from_name(setting), 0);
    fs::create_directories(out_dir);

    std::ostringstream table;
    table << "lambda_c auc aiou sim mae acc\n";
    for (const double lc : lambdas) {
        TrainConfig cfg = base;
        cfg.lambda_c = lc;
        std::cout << "lambda_c=" << lc << " training...\n";
        const TrainResult result = train(cfg, split);
        const auto report = evaluate(*result.model, split.test.empty() ? split.train
                                                                       : split.test);
        char row[160];
        std::snprintf(row, sizeof(row), "%.3g %.4f %.4f %.4f %.4f %.4f\n", lc, report.auc,
                      report.aiou, report.sim, report.mae, report.acc);
        table << row;
    }
    std::cout << table.str();
    std::ofstream out(fs::path(out_dir) / "sweep.txt");
    out << table.str();
    return 0;
}

int cmd_make_synthetic(uint64_t seed, int n, int points, const std::string& out_root) {
    const DatasetSplit split = generate_synthetic(seed, n, points);
    save_piad(split, out_root);
    std::cout << "wrote " << split.train.size() << " train / " << split.test.size()
              << " test samples under " << out_root << "/seen\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"image-guided 3D affordance grounding and classification"};
    app.require_subcommand(1);

    std::string config_path, data_root, out_dir = "run", setting = "seen";
    auto* train_cmd = app.add_subcommand("train", "train a model on a dataset root");
    train_cmd->add_option("--config", config_path, "key=value config file");
    train_cmd->add_option("--data", data_root, "dataset root")->required();
    train_cmd->add_option("--out", out_dir, "output directory");
    train_cmd->add_option("--setting", setting, "seen|unseen");

    std::string ckpt_path, report_path;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_root, "dataset root")->required();
    eval_cmd->add_option("--setting", setting, "seen|unseen");
    eval_cmd->add_option("--out", report_path, "report file path");

    std::string cloud_path, image_path, meta_path, ply_out = "prediction.ply";
    auto* predict_cmd = app.add_subcommand("predict", "ground one cloud/image pair");
    predict_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    predict_cmd->add_option("--cloud", cloud_path, "points.xyz file")->required();
    predict_cmd->add_option("--image", image_path, "binary P6 ppm")->required();
    predict_cmd->add_option("--meta", meta_path, "meta.txt with entity boxes");
    predict_cmd->add_option("--out", ply_out, "output ply path");

    std::string lambda_values = "0.1,0.3,0.5,0.7";
    auto* sweep_cmd = app.add_subcommand("sweep-lambda", "train across lambda_c values");
    sweep_cmd->add_option("--values", lambda_values, "comma-separated lambda_c values");
    sweep_cmd->add_option("--config", config_path, "key=value config file");
    sweep_cmd->add_option("--data", data_root, "dataset root")->required();
    sweep_cmd->add_option("--out", out_dir, "output directory");
    sweep_cmd->add_option("--setting", setting, "seen|unseen");

    uint64_t seed = 1;
    int n_samples = 25, n_points = 512;
    std::string synth_out = "synthetic";
    auto* synth_cmd = app.add_subcommand("make-synthetic", "generate a synthetic dataset");
    synth_cmd->add_option("--seed", seed, "generator seed");
    synth_cmd->add_option("--n", n_samples, "sample count");
    synth_cmd->add_option("--points", n_points, "points per cloud");
    synth_cmd->add_option("--out", synth_out, "output dataset root");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train_cmd))
            return cmd_train(config_path, data_root, out_dir, setting);
        if (app.got_subcommand(eval_cmd))
            return cmd_eval(ckpt_path, data_root, setting, report_path);
        if (app.got_subcommand(predict_cmd))
            return cmd_predict(ckpt_path, cloud_path, image_path, meta_path, ply_out);
        if (app.got_subcommand(sweep_cmd))
            return cmd_sweep(lambda_values, config_path, data_root, out_dir, setting);
        if (app.got_subcommand(synth_cmd))
            return cmd_make_synthetic(seed, n_samples, n_points, synth_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
