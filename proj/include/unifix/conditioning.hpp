#pragma once

#include "unifix/layers.hpp"

namespace unifix {

/// Hierarchical condition attached to every sample: a coarse defect group and
/// a fine defect type. Each type belongs to exactly one group.
struct ConditionLabels {
    int group = 0;
    int defect_type = 0;
    int n_groups = 2;
    int n_types = 3;
};

/// Group membership of each defect type: non-white background and watermark
/// are background-related (0), incorrect angle is angle-related (1).
struct LabelVocabulary {
    std::vector<std::string> group_names{"background", "angle"};
    std::vector<std::string> type_names{"non_white_background", "watermark", "incorrect_angle"};
    std::vector<int> group_of_type{0, 0, 1};

    int n_groups() const { return static_cast<int>(group_names.size()); }
    int n_types() const { return static_cast<int>(type_names.size()); }

    /// Labels for a defect type with the group filled from the membership table.
    ConditionLabels labels_for(int defect_type) const;

    /// Throws InvalidLabelError if the labels are out of range or the group
    /// disagrees with the membership table.
    void validate(const ConditionLabels& labels) const;
};

/// Parameters of one label-injection site: a row-lookup embedding followed by
/// tanh, and a 1x1 convolution producing per-channel relevance.
template <typename Scalar>
struct InjectionParams {
    Matrix<Scalar> embed_weights; // n_labels x c'
    Matrix<Scalar> embed_bias;    // c' x 1
    Matrix<Scalar> conv_weights;  // c' x c' (1x1 kernel)
    Matrix<Scalar> conv_bias;     // c' x 1
    // Divide the spatial relevance map by c'. Off by default.
    bool rescale_spatial = false;

    static InjectionParams create(int n_labels, int channels);
    /// Embedding rows ~ N(0, 1); conv weights ~ N(0, 1/c'); biases zero.
    static InjectionParams random(int n_labels, int channels, Rng& rng);

    InjectionParams zeros_like() const;
    int channels() const { return static_cast<int>(embed_bias.rows()); }
    int vocabulary() const { return static_cast<int>(embed_weights.rows()); }
    void collect(ParamList<Scalar>& out, const std::string& prefix);
};

/// Attention intermediates: per-channel relevance (c' x h x w, tanh range) and
/// its channel sum (1 x h x w).
template <typename Scalar>
struct RelevanceMaps {
    FeatureMap<Scalar> per_channel;
    FeatureMap<Scalar> spatial;
};

template <typename Scalar>
Vector<Scalar> embed_label(int label, const InjectionParams<Scalar>& params);

template <typename Scalar>
FeatureMap<Scalar> spatial_broadcast(const Vector<Scalar>& embedding, int height, int width);

template <typename Scalar>
RelevanceMaps<Scalar> compute_relevance(const FeatureMap<Scalar>& feature, const FeatureMap<Scalar>& broadcast,
                                        const InjectionParams<Scalar>& params);

/// Scales every channel of `feature` by the single-channel `spatial` map.
template <typename Scalar>
FeatureMap<Scalar> apply_attention(const FeatureMap<Scalar>& feature, const FeatureMap<Scalar>& spatial);

template <typename Scalar>
FeatureMap<Scalar> inject_condition(const FeatureMap<Scalar>& feature, int label, const InjectionParams<Scalar>& params);

// Traced variant used during training.

template <typename Scalar>
struct InjectionCache {
    int label = 0;
    Vector<Scalar> embedding;
    Matrix<Scalar> gated; // feature * broadcast embedding
    RelevanceMaps<Scalar> maps;
    FeatureMap<Scalar> input;
};

template <typename Scalar>
FeatureMap<Scalar> inject_forward(const FeatureMap<Scalar>& feature, int label, const InjectionParams<Scalar>& params,
                                  InjectionCache<Scalar>* cache);

template <typename Scalar>
FeatureMap<Scalar> inject_backward(const InjectionParams<Scalar>& params, const InjectionCache<Scalar>& cache,
                                   const FeatureMap<Scalar>& dy, InjectionParams<Scalar>* grad);

} // namespace unifix
