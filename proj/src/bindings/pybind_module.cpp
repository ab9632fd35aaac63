#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tripletnet/checkpoint.hpp"
#include "tripletnet/eval.hpp"
#include "tripletnet/losses.hpp"
#include "tripletnet/net.hpp"
#include "tripletnet/optim.hpp"
#include "tripletnet/pca.hpp"
#include "tripletnet/synth.hpp"
#include "tripletnet/train.hpp"

namespace py = pybind11;
using namespace tripletnet;

namespace {

template <typename T>
Tensor<T> tensor_from(const py::array_t<T, py::array::c_style | py::array::forcecast>& arr) {
  std::vector<int> shape(size_t(arr.ndim()));
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[size_t(i)] = int(arr.shape(i));
  Tensor<T> t(shape);
  std::copy(arr.data(), arr.data() + arr.size(), t.data());
  return t;
}

template <typename T>
py::array_t<T> array_from(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> arr(shape);
  std::copy(t.data(), t.data() + t.numel(), arr.mutable_data());
  return arr;
}

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor<double> rows_2d(const DArray& arr, const char* name) {
  if (arr.ndim() != 2) throw ShapeError(std::string(name) + " must be a 2-d array");
  return tensor_from<double>(arr);
}

Tensor<double> vec_1d(const DArray& arr, const char* name) {
  if (arr.ndim() != 1) throw ShapeError(std::string(name) + " must be a 1-d array");
  return tensor_from<double>(arr);
}

struct PyModel {
  Model<float> model;

  static PyModel build(const std::string& preset, int channels, uint64_t seed) {
    ArchConfig arch;
    if (preset == "paper")
      arch = ArchConfig::paper(channels);
    else if (preset == "small")
      arch = ArchConfig::small_preset();
    else
      throw ConfigError("unknown preset: " + preset);
    PyModel m{build_network<float>(arch)};
    he_init(m.model, seed);
    return m;
  }

  static PyModel build_custom(std::vector<int> input, std::vector<std::pair<int, int>> blocks,
                              int embedding_dim, uint64_t seed) {
    if (input.size() != 3) throw ConfigError("input must be [channels, height, width]");
    ArchConfig arch;
    arch.in_channels = input[0];
    arch.in_height = input[1];
    arch.in_width = input[2];
    arch.blocks = std::move(blocks);
    arch.embedding_dim = embedding_dim;
    PyModel m{build_network<float>(arch)};
    he_init(m.model, seed);
    return m;
  }

  py::array_t<float> embed_batch(const FArray& images) {
    Tensor<float> batch = images.ndim() == 3 ? tensor_from<float>(images) : tensor_from<float>(images);
    if (images.ndim() == 3) {
      Tensor<float> single({1, batch.dim(0), batch.dim(1), batch.dim(2)});
      std::copy(batch.data(), batch.data() + batch.numel(), single.data());
      batch = single;
    } else if (images.ndim() != 4) {
      throw ShapeError("images must be [C,H,W] or [N,C,H,W]");
    }
    return array_from(embed(model, batch, Mode::kEval));
  }

  py::array_t<float> features(const FArray& image, const std::string& layer) {
    if (image.ndim() != 3) throw ShapeError("image must be [C,H,W]");
    auto vec = layer_features(model, tensor_from<float>(image), layer);
    py::array_t<float> out(py::ssize_t(vec.size()));
    std::copy(vec.begin(), vec.end(), out.mutable_data());
    return out;
  }

  std::vector<std::string> registry() { return model.layer_registry(); }
  int64_t parameter_count() const { return model.parameter_count(); }
  std::vector<int> input_shape() const {
    return {model.arch.in_channels, model.arch.in_height, model.arch.in_width};
  }
  int embedding_dim() const { return model.arch.embedding_dim; }

  void save(const std::string& path) { save_model(path, model); }
  static PyModel load(const std::string& path) { return PyModel{load_model<float>(path).model}; }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "triplet ranking embeddings for one-shot recognition";

  py::register_exception<Error>(m, "TripletnetError");

  py::class_<PyModel>(m, "Model")
      .def_static("build", &PyModel::build, py::arg("preset"), py::arg("channels") = 1,
                  py::arg("seed") = 0,
                  "Build and He-initialize a preset network ('paper' or 'small').")
      .def_static("build_custom", &PyModel::build_custom, py::arg("input"), py::arg("blocks"),
                  py::arg("embedding_dim"), py::arg("seed") = 0)
      .def_static("load", &PyModel::load, py::arg("path"))
      .def("save", &PyModel::save, py::arg("path"))
      .def("embed", &PyModel::embed_batch, py::arg("images"),
           "Eval-mode embeddings for [N,C,H,W] (or a single [C,H,W]) images.")
      .def("layer_features", &PyModel::features, py::arg("image"), py::arg("layer"),
           "Spatial-max features of a conv layer, or the embedding for 'fc-1'.")
      .def("layer_registry", &PyModel::registry)
      .def("parameter_count", &PyModel::parameter_count)
      .def("input_shape", &PyModel::input_shape)
      .def("embedding_dim", &PyModel::embedding_dim);

  m.def(
      "triplet_loss",
      [](const DArray& p1, const DArray& p2, const DArray& n, double margin) {
        return triplet_loss(vec_1d(p1, "pos1"), vec_1d(p2, "pos2"), vec_1d(n, "neg"), margin)
            .scalar();
      },
      py::arg("pos1"), py::arg("pos2"), py::arg("neg"), py::arg("margin") = 2.0);

  m.def(
      "batch_triplet_loss",
      [](const DArray& p1, const DArray& p2, const DArray& n, double margin) {
        return batch_triplet_loss(rows_2d(p1, "pos1"), rows_2d(p2, "pos2"), rows_2d(n, "neg"),
                                  margin)
            .scalar();
      },
      py::arg("pos1"), py::arg("pos2"), py::arg("neg"), py::arg("margin") = 2.0);

  m.def(
      "embedding_regularizer",
      [](const DArray& p1, const DArray& p2, const DArray& n) {
        return embedding_regularizer(rows_2d(p1, "pos1"), rows_2d(p2, "pos2"), rows_2d(n, "neg"))
            .scalar();
      },
      py::arg("pos1"), py::arg("pos2"), py::arg("neg"));

  m.def(
      "total_loss",
      [](const DArray& p1, const DArray& p2, const DArray& n, double margin, double lambda) {
        return total_loss(rows_2d(p1, "pos1"), rows_2d(p2, "pos2"), rows_2d(n, "neg"),
                          LossConfig{margin, lambda})
            .scalar();
      },
      py::arg("pos1"), py::arg("pos2"), py::arg("neg"), py::arg("margin") = 2.0,
      py::arg("lambda_") = 1e-3);

  m.def(
      "predict_nn",
      [](const FArray& support, const std::vector<int>& class_ids, const FArray& query) {
        if (support.ndim() != 2) throw ShapeError("support must be [k,d]");
        if (size_t(support.shape(0)) != class_ids.size())
          throw ShapeError("one class id per support row required");
        std::vector<SupportEmbedding> sup(class_ids.size());
        const int d = int(support.shape(1));
        for (size_t i = 0; i < class_ids.size(); ++i) {
          sup[i].class_id = class_ids[i];
          sup[i].vec.assign(support.data() + i * size_t(d), support.data() + (i + 1) * size_t(d));
        }
        if (query.ndim() != 1 || int(query.shape(0)) != d)
          throw ShapeError("query must be a length-d vector");
        return predict_nn(sup, std::span<const float>(query.data(), size_t(d)));
      },
      py::arg("support"), py::arg("class_ids"), py::arg("query"));

  m.def(
      "class_distribution",
      [](const FArray& support, const std::vector<int>& class_ids, const FArray& query) {
        if (support.ndim() != 2) throw ShapeError("support must be [k,d]");
        std::vector<SupportEmbedding> sup(size_t(support.shape(0)));
        const int d = int(support.shape(1));
        for (size_t i = 0; i < sup.size(); ++i) {
          sup[i].class_id = i < class_ids.size() ? class_ids[i] : int(i);
          sup[i].vec.assign(support.data() + i * size_t(d), support.data() + (i + 1) * size_t(d));
        }
        return class_distribution(sup, std::span<const float>(query.data(), size_t(d)));
      },
      py::arg("support"), py::arg("class_ids"), py::arg("query"));

  m.def(
      "pca_project",
      [](const DArray& data, int dims) {
        if (data.ndim() != 2) throw ShapeError("data must be [n,d]");
        const int rows = int(data.shape(0)), cols = int(data.shape(1));
        std::vector<double> flat(data.data(), data.data() + data.size());
        PcaResult res = pca_project(flat, rows, cols, dims);
        py::array_t<double> coords({py::ssize_t(rows), py::ssize_t(dims)});
        std::copy(res.coords.begin(), res.coords.end(), coords.mutable_data());
        return py::make_tuple(coords, res.explained);
      },
      py::arg("data"), py::arg("dims") = 2);

  m.def(
      "lr_schedule",
      [](double initial_lr, int64_t halving_period, int64_t iteration) {
        TrainConfig cfg;
        cfg.initial_lr = initial_lr;
        cfg.lr_halving_period = halving_period;
        return lr_schedule(cfg, iteration);
      },
      py::arg("initial_lr") = 1e-4, py::arg("halving_period") = 10000, py::arg("iteration") = 0);

  m.def(
      "affine_augment",
      [](const FArray& image, uint64_t seed) {
        if (image.ndim() != 3) throw ShapeError("image must be [C,H,W]");
        return array_from(affine_augment(tensor_from<float>(image), AugmentParams{}, seed));
      },
      py::arg("image"), py::arg("seed"));

  m.def(
      "make_glyph_dataset",
      [](int classes, int per_class, int size, uint64_t seed) {
        ClassIndexedDataset ds = make_glyph_dataset(classes, per_class, size, seed);
        py::dict out;
        for (const auto& cls : ds.classes) {
          py::array_t<float> stack(
              {py::ssize_t(cls.images.size()), py::ssize_t(1), py::ssize_t(size), py::ssize_t(size)});
          float* dst = stack.mutable_data();
          for (const auto& img : cls.images) {
            std::copy(img.data(), img.data() + img.numel(), dst);
            dst += img.numel();
          }
          out[py::int_(cls.id)] = stack;
        }
        return out;
      },
      py::arg("classes"), py::arg("per_class"), py::arg("size"), py::arg("seed") = 0,
      "Deterministic synthetic character classes as {class_id: [n,1,s,s] arrays}.");
}
