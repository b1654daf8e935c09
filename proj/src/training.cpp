#include "alma/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "alma/constraint.hpp"
#include "alma/errors.hpp"
#include "portable_random.hpp"

namespace alma {

namespace {

void he_init(std::vector<double>& w, std::size_t fan_in, std::mt19937_64& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : w) v = scale * rnd::standard_normal(rng);
}

Dense make_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  Dense d{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0)};
  he_init(d.weights, in, rng);
  return d;
}

}  // namespace

Model make_reference_architecture(const Shape& input_shape, std::size_t num_classes, std::size_t hidden,
                                  std::uint64_t seed) {
  if (hidden == 0) throw InvalidArgument("reference model: hidden width must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  if (input_shape.size() == 3) {
    const std::size_t C = input_shape[0];
    constexpr std::size_t kFilters = 8;
    Conv2d conv{C, kFilters, 3, 3, 1, 1, std::vector<double>(kFilters * C * 9), std::vector<double>(kFilters, 0.0)};
    he_init(conv.weights, C * 9, rng);
    layers.emplace_back(std::move(conv));
    layers.emplace_back(ReLU{});
    layers.emplace_back(MaxPool2d{2, 2});
    layers.emplace_back(Flatten{});
    const std::size_t flat = kFilters * (input_shape[1] / 2) * (input_shape[2] / 2);
    layers.emplace_back(make_dense(flat, hidden, rng));
  } else if (input_shape.size() == 1) {
    layers.emplace_back(make_dense(input_shape[0], hidden, rng));
  } else {
    throw UnsupportedShape("reference model: inputs must be (C,H,W) or vectors, got " + shape_to_string(input_shape));
  }
  layers.emplace_back(ReLU{});
  layers.emplace_back(make_dense(hidden, num_classes, rng));
  return Model(input_shape, std::move(layers));
}

double classification_accuracy(const Model& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predicted_label(trace_forward(model, data.images[i]).output()) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainingReport train_reference_model(const Dataset& data, const TrainingOptions& options) {
  data.validate();
  if (data.size() == 0) throw InvalidArgument("training: empty dataset");
  if (options.epochs == 0 || options.batch_size == 0) throw InvalidArgument("training: epochs and batch size must be positive");
  const std::size_t K = *std::max_element(data.labels.begin(), data.labels.end()) + 1;

  TrainingReport report{make_reference_architecture(data.shape, std::max<std::size_t>(K, 3), options.hidden, options.seed),
                        0.0,
                        {}};
  Model& model = report.model;
  auto params = model.parameters();
  ParameterGradients velocity = zero_parameter_gradients(model);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      ParameterGradients grads = zero_parameter_gradients(model);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t s = order[b];
        const ActivationTrace trace = trace_forward(model, data.images[s]);
        const Tensor& z = trace.output();
        // Softmax cross-entropy, shifted by the max logit.
        const double zmax = *std::max_element(z.values().begin(), z.values().end());
        double denom = 0.0;
        for (double v : z.values()) denom += std::exp(v - zmax);
        Tensor upstream(z.shape());
        for (std::size_t k = 0; k < z.size(); ++k) upstream[k] = std::exp(z[k] - zmax) / denom;
        loss_sum += -(z[data.labels[s]] - zmax - std::log(denom));
        upstream[data.labels[s]] -= 1.0;
        backpropagate(model, trace, upstream, &grads);
      }
      const double scale = options.learning_rate / static_cast<double>(end - start);
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = *params[p];
        for (std::size_t k = 0; k < w.size(); ++k) {
          velocity[p][k] = options.momentum * velocity[p][k] + grads[p][k];
          w[k] -= scale * velocity[p][k];
        }
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(data.size());
    if (!std::isfinite(mean_loss)) throw TrainingFailed("training diverged at epoch " + std::to_string(epoch));
    report.epoch_loss.push_back(mean_loss);
  }

  report.train_accuracy = classification_accuracy(model, data);
  if (report.train_accuracy < options.min_accuracy) {
    throw TrainingFailed("training reached only " + std::to_string(100.0 * report.train_accuracy) +
                         "% train accuracy");
  }
  return report;
}

}  // namespace alma
