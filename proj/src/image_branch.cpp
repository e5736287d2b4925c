#include "afford3d/image_branch.hpp"

#include <cmath>
#include <stdexcept>

namespace afford3d {

Tensor resize_bilinear(const Tensor& pixels, int out_h, int out_w) {
    const int c = pixels.size(0), h = pixels.size(1), w = pixels.size(2);
    if (h == out_h && w == out_w) return pixels;
    Tensor out({c, out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double v = (y + 0.5) * sy - 0.5;
        v = std::min(std::max(v, 0.0), static_cast<double>(h - 1));
        const int i0 = std::min(static_cast<int>(std::floor(v)), h - 1);
        const int i1 = std::min(i0 + 1, h - 1);
        const double dv = v - i0;
        for (int x = 0; x < out_w; ++x) {
            double u = (x + 0.5) * sx - 0.5;
            u = std::min(std::max(u, 0.0), static_cast<double>(w - 1));
            const int j0 = std::min(static_cast<int>(std::floor(u)), w - 1);
            const int j1 = std::min(j0 + 1, w - 1);
            const double du = u - j0;
            for (int ch = 0; ch < c; ++ch) {
                out.at3(ch, y, x) = (1 - dv) * ((1 - du) * pixels.at3(ch, i0, j0) +
                                                du * pixels.at3(ch, i0, j1)) +
                                    dv * ((1 - du) * pixels.at3(ch, i1, j0) +
                                          du * pixels.at3(ch, i1, j1));
            }
        }
    }
    return out;
}

ImageBranch::ImageBranch(int channels, int heads, int resize_to, bool scene_gate_enabled,
                         uint64_t seed)
    : channels_(channels), resize_to_(resize_to), scene_gate_enabled_(scene_gate_enabled) {
    if (resize_to < kGrid) throw std::runtime_error("image size below output grid");

    // stride-2 stages until the map fits the 7x7 output grid
    const int chans[] = {24, 48, 96, 96, 96, 96};
    int size = resize_to, cin = 3, stage = 0;
    while (size > 2 * kGrid && stage < 6) {
        const int cout = chans[stage];
        convs_.emplace_back("image_encoder.conv" + std::to_string(stage), cin, cout, 3, 2, 1,
                            seed);
        stages_.push_back({3, 2, 1});
        cin = cout;
        size = (size + 1) / 2;
        ++stage;
    }
    proj_ = nn::Conv2d("image_encoder.proj", cin, channels, 1, 1, 0, seed);
    mha_entity_ = nn::MultiHeadAttention("image_branch.mha_entity", channels, heads, seed);
    mha_scene_ = nn::MultiHeadAttention("image_branch.mha_scene", channels, heads, seed);
    gate_ln_ = nn::Linear("image_branch.gate_ln", channels, channels, seed);
    out_lp_ = nn::Linear("image_branch.out_lp", channels, channels, seed);
}

int ImageBranch::grid_size(int input) const {
    int size = input;
    for (size_t i = 0; i < stages_.size(); ++i) size = (size + 1) / 2;
    return size;
}

ImageEmbedding ImageBranch::encode_image(const InteractionImage& image, int resize_to) const {
    if (image.height() <= 0 || image.width() <= 0)
        throw std::runtime_error("encode_image: degenerate image");
    Tensor resized = resize_bilinear(image.pixels, resize_to, resize_to);
    ag::Var x(std::move(resized));
    for (const auto& conv : convs_) x = ag::relu(conv.forward(x));
    x = ag::adaptive_avg_pool2d(x, kGrid, kGrid);
    x = ag::relu(proj_.forward(x));
    return ImageEmbedding{x};
}

namespace {

// box from pixel coordinates into feature-grid coordinates, expanded to at
// least one grid cell
std::array<double, 4> to_grid_box(const std::array<int, 4>& box, int img_w, int img_h,
                                  int grid_w, int grid_h) {
    const double sx = static_cast<double>(grid_w) / img_w;
    const double sy = static_cast<double>(grid_h) / img_h;
    double x0 = box[0] * sx, y0 = box[1] * sy, x1 = box[2] * sx, y1 = box[3] * sy;
    if (x1 - x0 < 1.0) {
        const double cx = 0.5 * (x0 + x1);
        x0 = std::min(std::max(cx - 0.5, 0.0), grid_w - 1.0);
        x1 = x0 + 1.0;
    }
    if (y1 - y0 < 1.0) {
        const double cy = 0.5 * (y0 + y1);
        y0 = std::min(std::max(cy - 0.5, 0.0), grid_h - 1.0);
        y1 = y0 + 1.0;
    }
    return {x0, y0, x1, y1};
}

}  // namespace

EntityFeatures ImageBranch::roi_pool(const ImageEmbedding& embed,
                                     const InteractionImage& image) const {
    const int gh = embed.h(), gw = embed.w();
    const auto obj_box =
        to_grid_box(image.box_object, image.width(), image.height(), gw, gh);
    const auto sub_box =
        to_grid_box(image.box_subject, image.width(), image.height(), gw, gh);

    EntityFeatures out;
    out.object = ag::roi_align(embed.grid, obj_box, kRoiBins);
    out.subject = ag::roi_align(embed.grid, sub_box, kRoiBins);

    // scene: the full-image box with the scene mask as a multiplicative
    // weight, area-averaged onto the grid
    Tensor weight(gh, gw);
    const int ih = image.height(), iw = image.width();
    for (int i = 0; i < gh; ++i) {
        const int r0 = (i * ih) / gh, r1 = ((i + 1) * ih + gh - 1) / gh;
        for (int j = 0; j < gw; ++j) {
            const int c0 = (j * iw) / gw, c1 = ((j + 1) * iw + gw - 1) / gw;
            double acc = 0.0;
            for (int y = r0; y < r1; ++y)
                for (int x = c0; x < c1; ++x) acc += image.scene_mask(y, x);
            weight(i, j) = acc / ((r1 - r0) * (c1 - c0));
        }
    }
    const ag::Var weighted = ag::mul_spatial(embed.grid, weight);
    out.scene = ag::roi_align(weighted, {0.0, 0.0, static_cast<double>(gw),
                                         static_cast<double>(gh)},
                              kRoiBins);
    return out;
}

std::pair<ag::Var, ag::Var> ImageBranch::fuse_entities(const EntityFeatures& ents) const {
    ag::Var f_e = mha_entity_.forward(ents.object, ents.subject);
    ag::Var f_s = mha_scene_.forward(ents.object, ents.scene);
    return {f_e, f_s};
}

ContextFeature ImageBranch::scene_gate(const ag::Var& f_e, const ag::Var& f_s) const {
    ag::Var mixed;
    if (scene_gate_enabled_) {
        const ag::Var gate = ag::sigmoid(gate_ln_.forward(f_s));
        mixed = ag::add(f_e, ag::mul(gate, f_s));
    } else {
        mixed = ag::add(f_e, f_s);
    }
    return ContextFeature{ag::relu(out_lp_.forward(mixed))};
}

ImageBranch::Activations ImageBranch::forward(const InteractionImage& image) const {
    Activations act;
    act.embedding = encode_image(image);
    act.entities = roi_pool(act.embedding, image);
    auto [f_e, f_s] = fuse_entities(act.entities);
    act.f_entity = f_e;
    act.f_scene = f_s;
    act.context = scene_gate(f_e, f_s);
    return act;
}

void ImageBranch::params(std::vector<nn::Param>& out) const {
    for (const auto& c : convs_) c.params(out);
    proj_.params(out);
    mha_entity_.params(out);
    mha_scene_.params(out);
    if (scene_gate_enabled_) gate_ln_.params(out);
    out_lp_.params(out);
}

}  // namespace afford3d
