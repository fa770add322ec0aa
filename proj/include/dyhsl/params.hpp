#pragma once

#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "dyhsl/tape.hpp"
#include "dyhsl/tensor.hpp"

namespace dyhsl {

// Parameter bundles are templated on the leaf type: `Tensor` for stored
// values and gradients, `Var` for a forward pass bound to a tape. Each bundle
// exposes `each(self, prefix, f)`, which calls `f(name, field)` for every
// tensor in a fixed order; that order defines checkpoint layout.

template <class T>
struct EncoderParamsT {
  T input_proj;    // F x d
  T spatial_emb;   // N x d
  T temporal_emb;  // T x d
  std::vector<T> layers;  // L_p matrices, d x d

  template <class Self, class F>
  static void each(Self& s, const std::string& prefix, F&& f) {
    f(prefix + "input_proj", s.input_proj);
    f(prefix + "spatial_emb", s.spatial_emb);
    f(prefix + "temporal_emb", s.temporal_emb);
    for (std::size_t l = 0; l < s.layers.size(); ++l) f(prefix + "layer" + std::to_string(l), s.layers[l]);
  }
};

template <class T>
struct HyperParamsT {
  T incidence_factor;     // d x I
  T hyperedge_relations;  // I x I

  template <class Self, class F>
  static void each(Self& s, const std::string& prefix, F&& f) {
    f(prefix + "incidence_factor", s.incidence_factor);
    f(prefix + "hyperedge_relations", s.hyperedge_relations);
  }
};

template <class T>
struct IGCParamsT {
  T w1;  // d x d, first interaction projector
  T w2;  // d x d, second interaction projector
  T w3;  // d x d, linear aggregation

  template <class Self, class F>
  static void each(Self& s, const std::string& prefix, F&& f) {
    f(prefix + "w1", s.w1);
    f(prefix + "w2", s.w2);
    f(prefix + "w3", s.w3);
  }
};

template <class T>
struct ScaleParamsT {
  HyperParamsT<T> hyper;
  IGCParamsT<T> igc;

  template <class Self, class F>
  static void each(Self& s, const std::string& prefix, F&& f) {
    HyperParamsT<T>::each(s.hyper, prefix + "hyper.", f);
    IGCParamsT<T>::each(s.igc, prefix + "igc.", f);
  }
};

template <class T>
struct FusionParamsT {
  T logits;  // 1 x J

  template <class Self, class F>
  static void each(Self& s, const std::string& prefix, F&& f) {
    f(prefix + "logits", s.logits);
  }
};

template <class T>
struct ReadoutParamsT {
  T weight;  // 2d x T'
  T bias;    // 1 x T'

  template <class Self, class F>
  static void each(Self& s, const std::string& prefix, F&& f) {
    f(prefix + "weight", s.weight);
    f(prefix + "bias", s.bias);
  }
};

template <class T>
struct ModelParamsT {
  EncoderParamsT<T> encoder;
  std::vector<ScaleParamsT<T>> scales;  // one per window size
  FusionParamsT<T> fusion;
  ReadoutParamsT<T> readout;

  template <class Self, class F>
  static void each(Self& s, const std::string& prefix, F&& f) {
    EncoderParamsT<T>::each(s.encoder, prefix + "encoder.", f);
    for (std::size_t j = 0; j < s.scales.size(); ++j) {
      ScaleParamsT<T>::each(s.scales[j], prefix + "scale" + std::to_string(j) + ".", f);
    }
    FusionParamsT<T>::each(s.fusion, prefix + "fusion.", f);
    ReadoutParamsT<T>::each(s.readout, prefix + "readout.", f);
  }
};

using EncoderParams = EncoderParamsT<Tensor>;
using HyperParams = HyperParamsT<Tensor>;
using IGCParams = IGCParamsT<Tensor>;
using ScaleParams = ScaleParamsT<Tensor>;
using FusionParams = FusionParamsT<Tensor>;
using ReadoutParams = ReadoutParamsT<Tensor>;
using ModelParameters = ModelParamsT<Tensor>;

using EncoderVars = EncoderParamsT<Var>;
using HyperVars = HyperParamsT<Var>;
using IGCVars = IGCParamsT<Var>;
using ScaleVars = ScaleParamsT<Var>;
using FusionVars = FusionParamsT<Var>;
using ReadoutVars = ReadoutParamsT<Var>;
using ModelVars = ModelParamsT<Var>;

template <class P, class F>
void for_each_param(P& params, F&& f) {
  std::remove_const_t<P>::each(params, "", f);
}

/// Builds a bundle of the same layout whose leaves are `f(name, leaf)`.
template <class U, class T, class F>
ModelParamsT<U> map_params(const ModelParamsT<T>& src, F&& f) {
  ModelParamsT<U> out;
  out.encoder.layers.resize(src.encoder.layers.size());
  out.scales.resize(src.scales.size());
  std::vector<U*> slots;
  for_each_param(out, [&](const std::string&, U& u) { slots.push_back(&u); });
  std::size_t k = 0;
  for_each_param(src, [&](const std::string& name, const T& t) { *slots[k++] = f(name, t); });
  return out;
}

/// Registers every tensor as a differentiable leaf of `tape`.
inline ModelVars bind_parameters(Tape& tape, const ModelParameters& params) {
  return map_params<Var>(params, [&](const std::string& name, const Tensor& t) { return tape.leaf(t, name); });
}

/// Reads the gradient of every bound leaf after `tape.backward`.
inline ModelParameters collect_gradients(const Tape& tape, const ModelVars& vars) {
  return map_params<Tensor>(vars, [&](const std::string&, const Var& v) { return tape.grad(v); });
}

inline std::size_t parameter_count(const ModelParameters& params) {
  std::size_t n = 0;
  for_each_param(params, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

}  // namespace dyhsl
