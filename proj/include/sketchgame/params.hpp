#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sketchgame/rng.hpp"
#include "sketchgame/tensor.hpp"

namespace sketchgame {

// Named trainable tensor with gradient and Adam moments.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;  // Adam first moment
    Tensor v;  // Adam second moment
};

/// Ordered collection of parameters with a role tag (sender / receiver / value).
/// Creation order is the reduction and update order, which keeps results
/// deterministic.
class ParameterSet {
  public:
    explicit ParameterSet(std::string role = "") : role_(std::move(role)) {}

    Param& create(const std::string& name, std::vector<int> shape);
    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;

    const std::string& role() const { return role_; }
    const std::vector<std::unique_ptr<Param>>& params() const { return order_; }

    void zero_grad();
    void scale_grad(double s);
    long num_values() const;

  private:
    std::string role_;
    std::vector<std::unique_ptr<Param>> order_;
    std::map<std::string, Param*> by_name_;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Standard Adam. Step counter lives here and goes into checkpoints.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // Throws NumericalError naming the parameter on a NaN gradient.
    void step(ParameterSet& set, double lr);

    long steps() const { return steps_; }
    void set_steps(long s) { steps_ = s; }

  private:
    AdamConfig cfg_;
    long steps_ = 0;
};

// Initializers (fan-in scaled normal and uniform).
void init_he_normal(Tensor& t, int fan_in, Rng& rng);
void init_uniform(Tensor& t, double lo, double hi, Rng& rng);

// Flat named-tensor container used by the checkpoint format.
using TensorMap = std::vector<std::pair<std::string, Tensor>>;

// Versioned binary container; round-trips float64 payloads bit-exactly.
void save_tensor_map(const std::string& path, const std::string& meta_json, const TensorMap& tensors);
TensorMap load_tensor_map(const std::string& path, std::string* meta_json);

// Pack value + Adam moments of every parameter under "<role>/...".
void pack_parameter_set(const ParameterSet& set, TensorMap& out);
void unpack_parameter_set(ParameterSet& set, const TensorMap& in);

}  // namespace sketchgame
