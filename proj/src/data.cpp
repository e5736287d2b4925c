#include "afford3d/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace afford3d {

const std::vector<std::string>& affordance_vocab() {
    static const std::vector<std::string> vocab = {
        "grasp", "contain", "lift", "open",    "lay",  "sit",
        "support", "wrap_grasp", "pour", "move", "display", "push",
        "pull",  "listen",  "wear", "press", "cut"};
    return vocab;
}

std::string setting_name(Setting s) { return s == Setting::seen ? "seen" : "unseen"; }

Setting setting_from_name(const std::string& name) {
    if (name == "seen") return Setting::seen;
    if (name == "unseen") return Setting::unseen;
    throw std::runtime_error("unknown setting: " + name + " (expected seen|unseen)");
}

Tensor scene_mask_from_boxes(int height, int width, const std::array<int, 4>& box_subject,
                             const std::array<int, 4>& box_object) {
    Tensor mask = Tensor::full({height, width}, 1.0);
    for (const auto& b : {box_subject, box_object})
        for (int y = std::max(0, b[1]); y < std::min(height, b[3]); ++y)
            for (int x = std::max(0, b[0]); x < std::min(width, b[2]); ++x)
                mask(y, x) = 0.0;
    return mask;
}

void normalize_cloud(PointCloud& cloud) {
    const int n = cloud.n();
    if (n == 0) throw std::runtime_error("normalize_cloud: empty cloud");
    double cx = 0, cy = 0, cz = 0;
    for (int i = 0; i < n; ++i) {
        cx += cloud.coords(i, 0);
        cy += cloud.coords(i, 1);
        cz += cloud.coords(i, 2);
    }
    cx /= n;
    cy /= n;
    cz /= n;
    double r2max = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = cloud.coords(i, 0) - cx;
        const double dy = cloud.coords(i, 1) - cy;
        const double dz = cloud.coords(i, 2) - cz;
        r2max = std::max(r2max, dx * dx + dy * dy + dz * dz);
    }
    const double radius = std::sqrt(r2max);
    if (radius < 1e-12) throw std::runtime_error("normalize_cloud: degenerate cloud");
    const bool centered = std::max({std::fabs(cx), std::fabs(cy), std::fabs(cz)}) <= 1e-7;
    const bool unit = std::fabs(radius - 1.0) <= 1e-7;
    if (centered && unit) return;
    const double inv = 1.0 / radius;
    for (int i = 0; i < n; ++i) {
        cloud.coords(i, 0) = (cloud.coords(i, 0) - cx) * inv;
        cloud.coords(i, 1) = (cloud.coords(i, 1) - cy) * inv;
        cloud.coords(i, 2) = (cloud.coords(i, 2) - cz) * inv;
    }
}

void validate_sample(const AffordanceSample& sample, bool canonical_size) {
    const int n = sample.cloud.n();
    if (canonical_size && n != kCanonicalPoints)
        throw std::runtime_error("sample " + sample.id + ": expected " +
                                 std::to_string(kCanonicalPoints) + " points, got " +
                                 std::to_string(n));
    if (!sample.cloud.coords.all_finite())
        throw std::runtime_error("sample " + sample.id + ": non-finite coordinates");
    double cx = 0, cy = 0, cz = 0;
    for (int i = 0; i < n; ++i) {
        cx += sample.cloud.coords(i, 0);
        cy += sample.cloud.coords(i, 1);
        cz += sample.cloud.coords(i, 2);
    }
    if (std::max({std::fabs(cx), std::fabs(cy), std::fabs(cz)}) / n > 1e-5)
        throw std::runtime_error("sample " + sample.id + ": cloud not centered");
    if (static_cast<int>(sample.gt_mask.size()) != n)
        throw std::runtime_error("sample " + sample.id + ": mask/point count mismatch");
    for (const double v : sample.gt_mask)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::runtime_error("sample " + sample.id + ": mask value outside [0,1]");
    if (sample.label < 0 || sample.label >= kNumAffordances)
        throw std::runtime_error("sample " + sample.id + ": label " +
                                 std::to_string(sample.label) + " outside vocabulary");
    const int h = sample.image.height(), w = sample.image.width();
    for (const auto& b : {sample.image.box_subject, sample.image.box_object}) {
        if (b[0] < 0 || b[1] < 0 || b[2] > w || b[3] > h || b[2] <= b[0] || b[3] <= b[1])
            throw std::runtime_error("sample " + sample.id + ": invalid box");
    }
    const Tensor expect =
        scene_mask_from_boxes(h, w, sample.image.box_subject, sample.image.box_object);
    if (!bitwise_equal(expect, sample.image.scene_mask))
        throw std::runtime_error("sample " + sample.id + ": scene mask inconsistent");
}

// ------------------------------------------------------------------- file io

Tensor read_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<double> vals;
    double x, y, z;
    while (in >> x >> y >> z) {
        vals.push_back(x);
        vals.push_back(y);
        vals.push_back(z);
    }
    if (vals.empty()) throw std::runtime_error("no points in " + path);
    Tensor coords(static_cast<int>(vals.size() / 3), 3);
    for (size_t i = 0; i < vals.size(); ++i) coords[i] = vals[i];
    return coords;
}

void write_xyz(const std::string& path, const Tensor& coords) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[96];
    for (int i = 0; i < coords.rows(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", coords(i, 0), coords(i, 1),
                      coords(i, 2));
        out << buf;
    }
}

namespace {

int next_ppm_token(std::istream& in) {
    // skips whitespace and '#' comments
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v;
    in >> v;
    return v;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error(path + ": not a binary P6 ppm");
    const int w = next_ppm_token(in);
    const int h = next_ppm_token(in);
    const int maxval = next_ppm_token(in);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error(path + ": unsupported ppm header");
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> bytes(static_cast<size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw std::runtime_error(path + ": truncated pixel data");
    Tensor px({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                px.at3(c, y, x) = bytes[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0;
    return px;
}

void write_ppm(const std::string& path, const Tensor& pixels) {
    const int h = pixels.size(1), w = pixels.size(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> bytes(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::min(1.0, std::max(0.0, pixels.at3(c, y, x)));
                bytes[(static_cast<size_t>(y) * w + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

namespace {

std::array<int, 4> parse_box(const std::string& text, const std::string& path) {
    std::array<int, 4> box{};
    char comma;
    std::istringstream ss(text);
    if (!(ss >> box[0] >> comma >> box[1] >> comma >> box[2] >> comma >> box[3]))
        throw std::runtime_error(path + ": malformed box '" + text + "'");
    return box;
}

AffordanceSample load_sample_dir(const fs::path& dir) {
    AffordanceSample s;
    s.id = dir.filename().string();
    for (const char* name : {"points.xyz", "mask.txt", "image.ppm", "meta.txt"})
        if (!fs::exists(dir / name))
            throw std::runtime_error("load_piad: missing file: " + (dir / name).string());

    s.cloud.coords = read_xyz((dir / "points.xyz").string());
    normalize_cloud(s.cloud);

    {
        std::ifstream in(dir / "mask.txt");
        double v;
        while (in >> v) s.gt_mask.push_back(v);
    }
    s.image.pixels = read_ppm((dir / "image.ppm").string());

    std::ifstream meta(dir / "meta.txt");
    std::string line;
    bool have_label = false, have_sub = false, have_obj = false;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "label") {
            s.label = std::stoi(value);
            have_label = true;
        } else if (key == "category") {
            s.category = value;
        } else if (key == "box_subject") {
            s.image.box_subject = parse_box(value, (dir / "meta.txt").string());
            have_sub = true;
        } else if (key == "box_object") {
            s.image.box_object = parse_box(value, (dir / "meta.txt").string());
            have_obj = true;
        }
    }
    if (!have_label || !have_sub || !have_obj)
        throw std::runtime_error("load_piad: incomplete meta: " + (dir / "meta.txt").string());

    s.image.scene_mask = scene_mask_from_boxes(s.image.height(), s.image.width(),
                                               s.image.box_subject, s.image.box_object);
    return s;
}

std::vector<AffordanceSample> load_part(const fs::path& dir, int& expected_points) {
    std::vector<fs::path> sample_dirs;
    if (fs::exists(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_directory()) sample_dirs.push_back(e.path());
    std::sort(sample_dirs.begin(), sample_dirs.end());
    std::vector<AffordanceSample> out;
    out.reserve(sample_dirs.size());
    for (const auto& d : sample_dirs) {
        AffordanceSample s = load_sample_dir(d);
        if (expected_points == 0) expected_points = s.cloud.n();
        if (s.cloud.n() != expected_points)
            throw std::runtime_error("sample " + s.id + ": expected " +
                                     std::to_string(expected_points) + " points, got " +
                                     std::to_string(s.cloud.n()));
        validate_sample(s, /*canonical_size=*/false);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

DatasetSplit load_piad(const std::string& root, Setting setting, int expected_points) {
    const fs::path base = fs::path(root) / setting_name(setting);
    if (!fs::exists(base))
        throw std::runtime_error("load_piad: missing directory: " + base.string());

    DatasetSplit split;
    split.setting = setting;
    split.train = load_part(base / "train", expected_points);
    split.test = load_part(base / "test", expected_points);
    if (split.train.empty() && split.test.empty())
        throw std::runtime_error("load_piad: no samples under " + base.string());

    std::set<std::string> train_cats, test_cats;
    for (const auto& s : split.train) train_cats.insert(s.category);
    for (const auto& s : split.test) test_cats.insert(s.category);
    if (setting == Setting::unseen)
        for (const auto& c : test_cats)
            if (train_cats.count(c))
                throw std::runtime_error(
                    "load_piad: unseen split shares category '" + c + "' between train and test");
    std::set<std::string> all = train_cats;
    all.insert(test_cats.begin(), test_cats.end());
    split.categories.assign(all.begin(), all.end());
    return split;
}

void save_piad(const DatasetSplit& split, const std::string& root) {
    const fs::path base = fs::path(root) / setting_name(split.setting);
    auto save_part = [&](const std::vector<AffordanceSample>& samples, const char* part) {
        for (const auto& s : samples) {
            const fs::path dir = base / part / s.id;
            fs::create_directories(dir);
            write_xyz((dir / "points.xyz").string(), s.cloud.coords);
            {
                std::ofstream out(dir / "mask.txt");
                char buf[48];
                for (const double v : s.gt_mask) {
                    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
                    out << buf;
                }
            }
            write_ppm((dir / "image.ppm").string(), s.image.pixels);
            {
                std::ofstream out(dir / "meta.txt");
                out << "label=" << s.label << "\n";
                out << "category=" << s.category << "\n";
                const auto& bs = s.image.box_subject;
                const auto& bo = s.image.box_object;
                out << "box_subject=" << bs[0] << "," << bs[1] << "," << bs[2] << "," << bs[3]
                    << "\n";
                out << "box_object=" << bo[0] << "," << bo[1] << "," << bo[2] << "," << bo[3]
                    << "\n";
            }
        }
    };
    save_part(split.train, "train");
    save_part(split.test, "test");
}

// --------------------------------------------------------- synthetic dataset

namespace {

struct PartSpec {
    std::string name;
    int affordance;  // index into affordance_vocab()
};

int vocab_index(const std::string& name) {
    const auto& v = affordance_vocab();
    for (size_t i = 0; i < v.size(); ++i)
        if (v[i] == name) return static_cast<int>(i);
    throw std::runtime_error("unknown affordance " + name);
}

// Composite primitive objects: a body plus attachments, each part a simple
// solid. Points are sampled per part; the target part carries the label.
struct TemplateSpec {
    std::string category;
    std::vector<PartSpec> parts;
    // weight of each part when distributing points
    std::vector<double> weights;
};

const std::vector<TemplateSpec>& templates() {
    static const std::vector<TemplateSpec> t = {
        {"pot",
         {{"body", vocab_index("contain")},
          {"handle", vocab_index("grasp")},
          {"lid", vocab_index("open")}},
         {0.62, 0.18, 0.20}},
        {"bag",
         {{"body", vocab_index("contain")}, {"strap", vocab_index("lift")}},
         {0.78, 0.22}},
        {"chair",
         {{"seat", vocab_index("sit")},
          {"back", vocab_index("support")},
          {"legs", vocab_index("move")}},
         {0.40, 0.30, 0.30}},
    };
    return t;
}

void sample_part_point(const std::string& category, int part, Rng& rng, double* p) {
    const double u = rng.uniform(), v = rng.uniform(), w = rng.uniform();
    const double two_pi = 6.283185307179586;
    if (category == "pot") {
        if (part == 0) {  // cylindrical wall
            const double a = two_pi * u;
            p[0] = 0.55 * std::cos(a);
            p[1] = 0.55 * std::sin(a);
            p[2] = -0.5 + 0.9 * v;
        } else if (part == 1) {  // side handle bar
            const double a = -0.35 + 0.7 * u;
            p[0] = 0.72 + 0.08 * (v - 0.5);
            p[1] = 0.08 * (w - 0.5);
            p[2] = a;
        } else {  // flat lid on top
            const double r = 0.55 * std::sqrt(u);
            const double a = two_pi * v;
            p[0] = r * std::cos(a);
            p[1] = r * std::sin(a);
            p[2] = 0.42 + 0.05 * w;
        }
    } else if (category == "bag") {
        if (part == 0) {  // ellipsoid shell
            const double a = two_pi * u;
            const double z = 2.0 * v - 1.0;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            p[0] = 0.62 * r * std::cos(a);
            p[1] = 0.40 * r * std::sin(a);
            p[2] = 0.55 * z - 0.1;
        } else {  // strap arc over the top
            const double a = 3.14159265358979 * u;
            p[0] = 0.38 * std::cos(a);
            p[1] = 0.06 * (v - 0.5);
            p[2] = 0.45 + 0.32 * std::sin(a);
        }
    } else {  // chair
        if (part == 0) {  // seat slab
            p[0] = -0.5 + u;
            p[1] = -0.5 + v;
            p[2] = 0.02 * (w - 0.5);
        } else if (part == 1) {  // backrest
            p[0] = -0.5 + u;
            p[1] = 0.48 + 0.04 * (v - 0.5);
            p[2] = 0.05 + 0.75 * w;
        } else {  // four legs
            const int leg = static_cast<int>(rng.uniform_int(4));
            const double sx = (leg & 1) ? 0.45 : -0.45;
            const double sy = (leg & 2) ? 0.45 : -0.45;
            p[0] = sx + 0.05 * (u - 0.5);
            p[1] = sy + 0.05 * (v - 0.5);
            p[2] = -0.72 + 0.70 * w;
        }
    }
}

}  // namespace

DatasetSplit generate_synthetic(uint64_t seed, int n_samples, int n_points) {
    if (n_points < 64) throw std::runtime_error("generate_synthetic: n_points must be >= 64");
    if (n_samples < 1) throw std::runtime_error("generate_synthetic: n_samples must be >= 1");

    DatasetSplit split;
    split.setting = Setting::seen;
    std::set<std::string> cats;

    for (int si = 0; si < n_samples; ++si) {
        Rng rng(seed_for(seed, "synthetic.sample." + std::to_string(si)));
        const TemplateSpec& tpl = templates()[si % templates().size()];
        const int n_parts = static_cast<int>(tpl.parts.size());
        const int target = static_cast<int>(rng.uniform_int(n_parts));

        AffordanceSample s;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "s%04d", si);
        s.id = idbuf;
        s.category = tpl.category;
        s.label = tpl.parts[target].affordance;
        cats.insert(s.category);

        // distribute points over parts, at least 8 per part
        std::vector<int> counts(n_parts, 8);
        int remaining = n_points - 8 * n_parts;
        for (int p = 0; p < n_parts; ++p) {
            const int extra = (p == n_parts - 1)
                                  ? remaining
                                  : static_cast<int>(remaining * tpl.weights[p]);
            counts[p] += extra;
            if (p != n_parts - 1) remaining -= extra;
        }

        s.cloud.coords = Tensor(n_points, 3);
        s.part_ids.resize(n_points);
        int row = 0;
        for (int p = 0; p < n_parts; ++p)
            for (int c = 0; c < counts[p]; ++c, ++row) {
                double pt[3];
                sample_part_point(tpl.category, p, rng, pt);
                for (int d = 0; d < 3; ++d)
                    s.cloud.coords(row, d) = pt[d] + 0.004 * rng.normal();
                s.part_ids[row] = p;
            }
        normalize_cloud(s.cloud);

        // exact part indicator softened by a distance falloff capped below 0.5
        s.gt_mask.assign(n_points, 0.0);
        const double sigma = 0.045;
        for (int i = 0; i < n_points; ++i) {
            if (s.part_ids[i] == target) {
                s.gt_mask[i] = 1.0;
                continue;
            }
            double d2min = 1e30;
            for (int j = 0; j < n_points; ++j) {
                if (s.part_ids[j] != target) continue;
                double d2 = 0.0;
                for (int d = 0; d < 3; ++d) {
                    const double diff = s.cloud.coords(i, d) - s.cloud.coords(j, d);
                    d2 += diff * diff;
                }
                d2min = std::min(d2min, d2);
            }
            s.gt_mask[i] = 0.45 * std::exp(-d2min / (2.0 * sigma * sigma));
        }

        // 64x64 orthographic silhouette; object occupies the right 2/3 of the
        // frame, a synthetic "subject" blob sits in the top-left corner
        const int img = 64;
        Tensor px = Tensor::full({3, img, img}, 1.0);
        int ox0 = img, oy0 = img, ox1 = 0, oy1 = 0;
        for (int i = 0; i < n_points; ++i) {
            const int cx = 40 + static_cast<int>(std::lround(s.cloud.coords(i, 0) * 18.0));
            const int cy = 32 - static_cast<int>(std::lround(s.cloud.coords(i, 2) * 18.0));
            if (cx < 1 || cx >= img - 1 || cy < 1 || cy >= img - 1) continue;
            const bool on_target = s.part_ids[i] == target;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    px.at3(0, cy + dy, cx + dx) = on_target ? 0.85 : 0.25;
                    px.at3(1, cy + dy, cx + dx) = 0.25;
                    px.at3(2, cy + dy, cx + dx) = on_target ? 0.15 : 0.30;
                }
            ox0 = std::min(ox0, cx - 1);
            oy0 = std::min(oy0, cy - 1);
            ox1 = std::max(ox1, cx + 2);
            oy1 = std::max(oy1, cy + 2);
        }
        if (ox1 <= ox0 || oy1 <= oy0) {
            ox0 = 24;
            oy0 = 8;
            ox1 = 60;
            oy1 = 56;
        }
        // subject blob
        const int sx = 9 + static_cast<int>(rng.uniform_int(3));
        const int sy = 9 + static_cast<int>(rng.uniform_int(3));
        for (int dy = -5; dy <= 5; ++dy)
            for (int dx = -5; dx <= 5; ++dx)
                if (dx * dx + dy * dy <= 25) {
                    px.at3(0, sy + dy, sx + dx) = 0.95;
                    px.at3(1, sy + dy, sx + dx) = 0.75;
                    px.at3(2, sy + dy, sx + dx) = 0.55;
                }
        s.image.pixels = std::move(px);
        s.image.box_object = {ox0, oy0, ox1, oy1};
        s.image.box_subject = {sx - 6, sy - 6, sx + 7, sy + 7};
        s.image.scene_mask =
            scene_mask_from_boxes(img, img, s.image.box_subject, s.image.box_object);

        validate_sample(s, /*canonical_size=*/false);
        if (si % 5 == 4)
            split.test.push_back(std::move(s));
        else
            split.train.push_back(std::move(s));
    }
    split.categories.assign(cats.begin(), cats.end());
    return split;
}

std::vector<std::pair<int, int>> pair_for_training(const DatasetSplit& split, uint64_t seed) {
    if (split.train.empty()) throw std::runtime_error("pair_for_training: empty train split");
    std::vector<std::vector<int>> by_label(kNumAffordances);
    for (size_t i = 0; i < split.train.size(); ++i)
        by_label[split.train[i].label].push_back(static_cast<int>(i));

    Rng rng(seed);
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(split.train.size() * 2);
    for (size_t ci = 0; ci < split.train.size(); ++ci) {
        const auto& candidates = by_label[split.train[ci].label];
        if (candidates.size() < 2) {
            pairs.emplace_back(static_cast<int>(ci), candidates[0]);
            pairs.emplace_back(static_cast<int>(ci), candidates[0]);
        } else {
            const int a = static_cast<int>(rng.uniform_int(candidates.size()));
            int b = static_cast<int>(rng.uniform_int(candidates.size() - 1));
            if (b >= a) ++b;
            pairs.emplace_back(static_cast<int>(ci), candidates[a]);
            pairs.emplace_back(static_cast<int>(ci), candidates[b]);
        }
    }
    return pairs;
}

}  // namespace afford3d
