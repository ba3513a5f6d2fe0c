#include "unifix/conditioning.hpp"

namespace unifix {

ConditionLabels LabelVocabulary::labels_for(int defect_type) const
{
    if (defect_type < 0 || defect_type >= n_types())
        throw InvalidLabelError("defect type " + std::to_string(defect_type) + " outside [0, " +
                                std::to_string(n_types()) + ")");
    return ConditionLabels{group_of_type[static_cast<std::size_t>(defect_type)], defect_type, n_groups(), n_types()};
}

void LabelVocabulary::validate(const ConditionLabels& labels) const
{
    if (labels.group < 0 || labels.group >= n_groups())
        throw InvalidLabelError("group " + std::to_string(labels.group) + " outside [0, " + std::to_string(n_groups()) +
                                ")");
    const ConditionLabels expected = labels_for(labels.defect_type);
    if (expected.group != labels.group)
        throw InvalidLabelError("defect type " + std::to_string(labels.defect_type) + " belongs to group " +
                                std::to_string(expected.group) + ", not " + std::to_string(labels.group));
}

template <typename Scalar>
InjectionParams<Scalar> InjectionParams<Scalar>::create(int n_labels, int channels)
{
    if (n_labels <= 0 || channels <= 0) throw InvalidShapeError("injection: vocabulary and channels must be positive");
    InjectionParams p;
    p.embed_weights = Matrix<Scalar>::Zero(n_labels, channels);
    p.embed_bias = Matrix<Scalar>::Zero(channels, 1);
    p.conv_weights = Matrix<Scalar>::Zero(channels, channels);
    p.conv_bias = Matrix<Scalar>::Zero(channels, 1);
    return p;
}

template <typename Scalar>
InjectionParams<Scalar> InjectionParams<Scalar>::random(int n_labels, int channels, Rng& rng)
{
    InjectionParams p = create(n_labels, channels);
    p.embed_weights = random_normal<Scalar>(n_labels, channels, 1.0, rng);
    p.conv_weights = random_normal<Scalar>(channels, channels, 1.0 / std::sqrt(static_cast<double>(channels)), rng);
    return p;
}

template <typename Scalar>
InjectionParams<Scalar> InjectionParams<Scalar>::zeros_like() const
{
    InjectionParams p = create(vocabulary(), channels());
    p.rescale_spatial = rescale_spatial;
    return p;
}

template <typename Scalar>
void InjectionParams<Scalar>::collect(ParamList<Scalar>& out, const std::string& prefix)
{
    out.push_back({prefix + ".embed_weights", &embed_weights});
    out.push_back({prefix + ".embed_bias", &embed_bias});
    out.push_back({prefix + ".conv_weights", &conv_weights});
    out.push_back({prefix + ".conv_bias", &conv_bias});
}

template <typename Scalar>
Vector<Scalar> embed_label(int label, const InjectionParams<Scalar>& params)
{
    if (label < 0 || label >= params.vocabulary())
        throw InvalidLabelError("label " + std::to_string(label) + " outside [0, " +
                                std::to_string(params.vocabulary()) + ")");
    Vector<Scalar> pre = params.embed_weights.row(label).transpose() + params.embed_bias.col(0);
    return pre.array().tanh();
}

template <typename Scalar>
FeatureMap<Scalar> spatial_broadcast(const Vector<Scalar>& embedding, int height, int width)
{
    if (height < 1 || width < 1)
        throw InvalidShapeError("spatial_broadcast: nonpositive size " + std::to_string(height) + "x" +
                                std::to_string(width));
    FeatureMap<Scalar> out(static_cast<int>(embedding.size()), height, width);
    out.data.colwise() = embedding;
    return out;
}

namespace {

template <typename Scalar>
FeatureMap<Scalar> channel_sum(const FeatureMap<Scalar>& per_channel, bool rescale)
{
    RowVector<double> sum = per_channel.data.template cast<double>().colwise().sum();
    if (rescale) sum /= static_cast<double>(per_channel.channels());
    return FeatureMap<Scalar>(Matrix<Scalar>(sum.template cast<Scalar>()), per_channel.height, per_channel.width);
}

template <typename Scalar>
void check_injection_shapes(const FeatureMap<Scalar>& feature, const InjectionParams<Scalar>& params, const char* what)
{
    if (feature.channels() != params.channels() || params.conv_weights.rows() != params.channels() ||
        params.conv_weights.cols() != params.channels())
        throw InvalidShapeError(std::string(what) + ": feature " + shape_string(feature) + " does not match " +
                                std::to_string(params.channels()) + " injection channels");
}

} // namespace

template <typename Scalar>
RelevanceMaps<Scalar> compute_relevance(const FeatureMap<Scalar>& feature, const FeatureMap<Scalar>& broadcast,
                                        const InjectionParams<Scalar>& params)
{
    require_same_shape(feature, broadcast, "compute_relevance");
    check_injection_shapes(feature, params, "compute_relevance");
    const Matrix<Scalar> gated = feature.data.cwiseProduct(broadcast.data);
    Matrix<Scalar> pre = params.conv_weights * gated;
    pre.colwise() += params.conv_bias.col(0);
    RelevanceMaps<Scalar> maps;
    maps.per_channel = FeatureMap<Scalar>(Matrix<Scalar>(pre.array().tanh()), feature.height, feature.width);
    maps.spatial = channel_sum(maps.per_channel, params.rescale_spatial);
    return maps;
}

template <typename Scalar>
FeatureMap<Scalar> apply_attention(const FeatureMap<Scalar>& feature, const FeatureMap<Scalar>& spatial)
{
    if (spatial.channels() != 1 || spatial.height != feature.height || spatial.width != feature.width)
        throw InvalidShapeError("apply_attention: spatial map " + shape_string(spatial) + " does not match feature " +
                                shape_string(feature));
    Matrix<Scalar> out = feature.data.array().rowwise() * spatial.data.row(0).array();
    return FeatureMap<Scalar>(std::move(out), feature.height, feature.width);
}

template <typename Scalar>
FeatureMap<Scalar> inject_condition(const FeatureMap<Scalar>& feature, int label, const InjectionParams<Scalar>& params)
{
    return inject_forward(feature, label, params, static_cast<InjectionCache<Scalar>*>(nullptr));
}

template <typename Scalar>
FeatureMap<Scalar> inject_forward(const FeatureMap<Scalar>& feature, int label, const InjectionParams<Scalar>& params,
                                  InjectionCache<Scalar>* cache)
{
    check_injection_shapes(feature, params, "inject_condition");
    Vector<Scalar> embedding = embed_label(label, params);
    Matrix<Scalar> gated = feature.data.array().colwise() * embedding.array();
    Matrix<Scalar> pre = params.conv_weights * gated;
    pre.colwise() += params.conv_bias.col(0);
    RelevanceMaps<Scalar> maps;
    maps.per_channel = FeatureMap<Scalar>(Matrix<Scalar>(pre.array().tanh()), feature.height, feature.width);
    maps.spatial = channel_sum(maps.per_channel, params.rescale_spatial);
    FeatureMap<Scalar> out = apply_attention(feature, maps.spatial);
    if (cache) {
        cache->label = label;
        cache->embedding = std::move(embedding);
        cache->gated = std::move(gated);
        cache->maps = std::move(maps);
        cache->input = feature;
    }
    return out;
}

template <typename Scalar>
FeatureMap<Scalar> inject_backward(const InjectionParams<Scalar>& params, const InjectionCache<Scalar>& cache,
                                   const FeatureMap<Scalar>& dy, InjectionParams<Scalar>* grad)
{
    const auto& feature = cache.input.data;
    const auto& spatial = cache.maps.spatial.data;
    const auto& per_channel = cache.maps.per_channel.data;

    // Direct path: out = feature * spatial.
    Matrix<Scalar> dfeature = dy.data.array().rowwise() * spatial.row(0).array();
    RowVector<Scalar> dspatial = dy.data.cwiseProduct(feature).colwise().sum();
    if (params.rescale_spatial) dspatial /= static_cast<Scalar>(params.channels());

    // Through the channel sum and tanh of the 1x1 conv.
    Matrix<Scalar> dpre = (Scalar(1) - per_channel.array().square()).rowwise() * dspatial.array();
    if (grad) {
        grad->conv_weights.noalias() += dpre * cache.gated.transpose();
        grad->conv_bias.col(0) += dpre.rowwise().sum();
    }
    const Matrix<Scalar> dgated = params.conv_weights.transpose() * dpre;
    dfeature.array() += dgated.array().colwise() * cache.embedding.array();

    if (grad) {
        const Vector<Scalar> dembedding = dgated.cwiseProduct(feature).rowwise().sum();
        const Vector<Scalar> dpre_embed = dembedding.array() * (Scalar(1) - cache.embedding.array().square());
        grad->embed_weights.row(cache.label) += dpre_embed.transpose();
        grad->embed_bias.col(0) += dpre_embed;
    }
    return FeatureMap<Scalar>(std::move(dfeature), dy.height, dy.width);
}

#define UNIFIX_INSTANTIATE_CONDITIONING(T)                                                                             \
    template struct InjectionParams<T>;                                                                                \
    template Vector<T> embed_label(int, const InjectionParams<T>&);                                                    \
    template FeatureMap<T> spatial_broadcast(const Vector<T>&, int, int);                                              \
    template RelevanceMaps<T> compute_relevance(const FeatureMap<T>&, const FeatureMap<T>&, const InjectionParams<T>&); \
    template FeatureMap<T> apply_attention(const FeatureMap<T>&, const FeatureMap<T>&);                                \
    template FeatureMap<T> inject_condition(const FeatureMap<T>&, int, const InjectionParams<T>&);                     \
    template FeatureMap<T> inject_forward(const FeatureMap<T>&, int, const InjectionParams<T>&, InjectionCache<T>*);   \
    template FeatureMap<T> inject_backward(const InjectionParams<T>&, const InjectionCache<T>&, const FeatureMap<T>&,  \
                                           InjectionParams<T>*);

UNIFIX_INSTANTIATE_CONDITIONING(float)
UNIFIX_INSTANTIATE_CONDITIONING(double)

} // namespace unifix
