#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "afford3d/harness.hpp"
#include "afford3d/ply.hpp"

namespace py = pybind11;
using namespace afford3d;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<int> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<int>(a.shape(i));
    Tensor t(shape);
    std::memcpy(t.data(), a.data(), sizeof(double) * t.numel());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::memcpy(a.mutable_data(), t.data(), sizeof(double) * t.numel());
    return a;
}

std::vector<double> vec_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), a.data() + a.size()};
}

PointCloud cloud_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& coords,
    bool normalize) {
    if (coords.ndim() != 2 || coords.shape(1) != 3)
        throw std::runtime_error("coords must be an (N, 3) array");
    PointCloud c;
    c.coords = tensor_from_array(coords);
    if (normalize) normalize_cloud(c);
    return c;
}

InteractionImage image_from_parts(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& pixels,
    const std::array<int, 4>& box_subject, const std::array<int, 4>& box_object) {
    if (pixels.ndim() != 3 || pixels.shape(0) != 3)
        throw std::runtime_error("image must be a (3, H, W) array");
    InteractionImage img;
    img.pixels = tensor_from_array(pixels);
    img.box_subject = box_subject;
    img.box_object = box_object;
    img.scene_mask = scene_mask_from_boxes(img.height(), img.width(), box_subject, box_object);
    return img;
}

// Thin forward-pass wrapper around the full four-stage model.
class Pipeline {
public:
    Pipeline(int channels, int resize_to, int knn_k, int scale_large, int scale_small,
             uint64_t seed) {
        TrainConfig cfg;
        cfg.channels = channels;
        cfg.resize_to = resize_to;
        cfg.knn_k = knn_k;
        cfg.scale_large = scale_large;
        cfg.scale_small = scale_small;
        cfg.seed = seed;
        model_ = std::make_shared<AffordModel>(model_config(cfg));
    }

    explicit Pipeline(const std::string& checkpoint_path) {
        model_ = model_from_checkpoint(load_checkpoint(checkpoint_path));
    }

    py::tuple predict(const py::array_t<double, py::array::c_style | py::array::forcecast>& coords,
                      const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
                      const std::array<int, 4>& box_subject,
                      const std::array<int, 4>& box_object) const {
        ag::NoGradGuard guard;
        const PointCloud cloud = cloud_from_array(coords, true);
        const InteractionImage img = image_from_parts(image, box_subject, box_object);
        const Prediction pred = model_->forward(cloud, img);
        py::array_t<double> mask(static_cast<py::ssize_t>(pred.mask.val().numel()));
        std::memcpy(mask.mutable_data(), pred.mask.val().data(),
                    sizeof(double) * pred.mask.val().numel());
        return py::make_tuple(mask, array_from_tensor(pred.class_probs),
                              pred.predicted_label());
    }

private:
    std::shared_ptr<AffordModel> model_;
};

}  // namespace

PYBIND11_MODULE(afford3d, m) {
    m.doc() = "image-guided 3D affordance grounding and classification";

    m.def(
        "auc",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& gt)
            -> py::object {
            const auto v = metrics::auc(vec_from_array(pred), vec_from_array(gt));
            if (!v) return py::none();
            return py::float_(*v);
        },
        "ROC area in percent; None when the ground truth is degenerate");
    m.def("aiou",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& gt)
              -> py::object {
              const auto v = metrics::aiou(vec_from_array(pred), vec_from_array(gt));
              if (!v) return py::none();
              return py::float_(*v);
          });
    m.def("sim",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& gt) {
              return metrics::sim(vec_from_array(pred), vec_from_array(gt));
          });
    m.def("mae",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& gt) {
              return metrics::mae(vec_from_array(pred), vec_from_array(gt));
          });
    m.def("acc", [](const std::vector<int>& pred, const std::vector<int>& gt) {
        return metrics::acc(pred, gt);
    });

    m.def(
        "farthest_point_sample",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& coords, int n,
           int start) {
            return farthest_point_sample(cloud_from_array(coords, false), n, start);
        },
        py::arg("coords"), py::arg("n"), py::arg("start") = 0);

    m.def(
        "interp_weights",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& points,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& centers) {
            const InterpWeights w =
                interp_weights(tensor_from_array(points), tensor_from_array(centers));
            py::list idx, wts;
            for (size_t i = 0; i < w.idx.size(); ++i) {
                idx.append(py::make_tuple(w.idx[i][0], w.idx[i][1], w.idx[i][2]));
                wts.append(py::make_tuple(w.w[i][0], w.w[i][1], w.w[i][2]));
            }
            return py::make_tuple(idx, wts);
        },
        "three nearest centers and inverse-distance weights per point");

    m.def(
        "build_graph",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& features) {
            const SimilarityGraph g = build_graph_from_features(tensor_from_array(features));
            return py::make_tuple(array_from_tensor(g.raw), array_from_tensor(g.adjacency),
                                  array_from_tensor(g.normalized));
        },
        "similarity graph (raw, adjacency, normalized) of column features");

    m.def(
        "generate_synthetic",
        [](uint64_t seed, int n_samples, int n_points) {
            const DatasetSplit split = generate_synthetic(seed, n_samples, n_points);
            py::list out;
            auto emit = [&](const AffordanceSample& s, bool is_test) {
                py::dict d;
                d["id"] = s.id;
                d["coords"] = array_from_tensor(s.cloud.coords);
                py::array_t<double> mask(static_cast<py::ssize_t>(s.gt_mask.size()));
                std::memcpy(mask.mutable_data(), s.gt_mask.data(),
                            sizeof(double) * s.gt_mask.size());
                d["mask"] = mask;
                d["label"] = s.label;
                d["category"] = s.category;
                d["image"] = array_from_tensor(s.image.pixels);
                d["box_subject"] = s.image.box_subject;
                d["box_object"] = s.image.box_object;
                d["is_test"] = is_test;
                out.append(d);
            };
            for (const auto& s : split.train) emit(s, false);
            for (const auto& s : split.test) emit(s, true);
            return out;
        },
        py::arg("seed"), py::arg("n_samples"), py::arg("n_points"));

    m.def("affordance_vocab", [] { return affordance_vocab(); });

    py::class_<Pipeline>(m, "Pipeline")
        .def(py::init<int, int, int, int, int, uint64_t>(), py::arg("channels") = 64,
             py::arg("resize_to") = 64, py::arg("knn_k") = 8, py::arg("scale_large") = 64,
             py::arg("scale_small") = 128, py::arg("seed") = 0)
        .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
        .def("predict", &Pipeline::predict, py::arg("coords"), py::arg("image"),
             py::arg("box_subject"), py::arg("box_object"),
             "returns (mask, class_probs, label)");
}
