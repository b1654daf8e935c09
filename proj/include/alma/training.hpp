#pragma once

#include <cstdint>
#include <vector>

#include "alma/dataset.hpp"
#include "alma/model.hpp"

namespace alma {

struct TrainingOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t hidden = 32;
  std::uint64_t seed = 1;
  double min_accuracy = 0.8;  // below this the run is rejected
};

struct TrainingReport {
  Model model;
  double train_accuracy = 0.0;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

/// Small classifier for a dataset shape. (C,H,W) inputs get
/// conv3x3(C->8) relu maxpool2 flatten dense(->hidden) relu dense(->K);
/// vector inputs get dense(->hidden) relu dense(->K). He-normal weights, zero biases.
Model make_reference_architecture(const Shape& input_shape, std::size_t num_classes, std::size_t hidden,
                                  std::uint64_t seed);

/// Minibatch SGD with momentum on softmax cross-entropy. Deterministic given the
/// options. Throws TrainingFailed when the final train accuracy is below min_accuracy.
TrainingReport train_reference_model(const Dataset& data, const TrainingOptions& options = {});

/// Fraction of samples whose argmax logit equals the label.
double classification_accuracy(const Model& model, const Dataset& data);

}  // namespace alma
