#include <doctest.h>

#include <filesystem>
#include <random>

#include "alma/dataset.hpp"
#include "alma/errors.hpp"
#include "alma/training.hpp"
#include "test_support.hpp"

using namespace alma;

namespace {

// Three well separated Gaussian blobs in the plane, mapped into the unit box.
Dataset blobs(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.04);
  const double centers[3][2] = {{0.2, 0.2}, {0.8, 0.3}, {0.5, 0.85}};
  Dataset d;
  d.shape = {2};
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const std::size_t k = i % 3;
    d.images.push_back(Tensor::vector({std::clamp(centers[k][0] + noise(rng), 0.0, 1.0),
                                       std::clamp(centers[k][1] + noise(rng), 0.0, 1.0)}));
    d.labels.push_back(k);
  }
  return d;
}

}  // namespace

TEST_CASE("separable blobs are fit exactly") {
  TrainingOptions o;
  o.epochs = 40;
  const auto rep = train_reference_model(blobs(30, 3), o);
  CHECK(rep.train_accuracy == 1.0);
  CHECK(rep.epoch_loss.size() == 40);
  CHECK(rep.epoch_loss.back() < rep.epoch_loss.front());
  CHECK(rep.model.num_classes() == 3);
}

TEST_CASE("training is bit reproducible for a fixed seed") {
  const Dataset d = make_desk_dataset(200, 11);
  TrainingOptions o;
  o.epochs = 3;
  o.min_accuracy = 0.0;
  const auto a = train_reference_model(d, o);
  const auto b = train_reference_model(d, o);
  CHECK(serialize_model(a.model) == serialize_model(b.model));
  o.seed = 2;
  CHECK(serialize_model(train_reference_model(d, o).model) != serialize_model(a.model));
}

TEST_CASE("failing to fit is reported") {
  Dataset d = blobs(10, 5);
  // Identical inputs with different labels cannot be separated.
  for (auto& img : d.images) img = Tensor::vector({0.5, 0.5});
  TrainingOptions o;
  o.epochs = 2;
  CHECK_THROWS_AS(train_reference_model(d, o), TrainingFailed);
  CHECK_THROWS_AS(train_reference_model(Dataset{}, o), InvalidArgument);
}

TEST_CASE("architecture shapes") {
  const Model conv = make_reference_architecture({3, 8, 8}, 10, 32, 1);
  CHECK(conv.num_classes() == 10);
  CHECK(conv.parameter_count() <= 100000);
  CHECK(make_reference_architecture({5}, 3, 8, 1).num_classes() == 3);
  CHECK_THROWS_AS(make_reference_architecture({2, 3}, 3, 8, 1), UnsupportedShape);
}

TEST_CASE("bundled reference model fits the bundled training set") {
  const Model m = load_model(std::filesystem::path(ALMA_DATA_DIR) / "reference_model.bin");
  const Dataset train = load_dataset(std::filesystem::path(ALMA_DATA_DIR) / "desk_train.bin");
  CHECK(classification_accuracy(m, train) >= 0.95);
  CHECK(m.parameter_count() <= 100000);
}

TEST_CASE("bundled reference model is reproduced by the default recipe") {
  const Dataset train = load_dataset(std::filesystem::path(ALMA_DATA_DIR) / "desk_train.bin");
  const auto rep = train_reference_model(train);
  CHECK(rep.train_accuracy >= 0.95);
  const Model bundled = load_model(std::filesystem::path(ALMA_DATA_DIR) / "reference_model.bin");
  CHECK(serialize_model(rep.model) == serialize_model(bundled));
}
