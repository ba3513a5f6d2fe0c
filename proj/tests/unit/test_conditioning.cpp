#include "unifix/conditioning.hpp"

#include "helpers.hpp"

using namespace unifix;
using testing::random_tensor;

namespace {

InjectionParams<double> random_params(int n_labels, int channels, std::uint64_t seed)
{
    Rng rng(seed);
    auto p = InjectionParams<double>::random(n_labels, channels, rng);
    p.embed_bias = random_normal<double>(channels, 1, 0.3, rng);
    p.conv_bias = random_normal<double>(channels, 1, 0.3, rng);
    return p;
}

// Loop oracles, written against the formulas rather than the library code.

std::vector<double> oracle_embedding(int label, const InjectionParams<double>& p)
{
    std::vector<double> v(static_cast<std::size_t>(p.channels()));
    for (int c = 0; c < p.channels(); ++c) v[c] = std::tanh(p.embed_weights(label, c) + p.embed_bias(c, 0));
    return v;
}

struct OracleMaps {
    std::vector<std::vector<std::vector<double>>> per_channel; // [c][i][j]
    std::vector<std::vector<double>> spatial;                  // [i][j]
};

OracleMaps oracle_relevance(const Tensor3<double>& f, const std::vector<double>& emb, const InjectionParams<double>& p)
{
    const int C = f.channels();
    OracleMaps m;
    m.per_channel.assign(C, std::vector<std::vector<double>>(f.height, std::vector<double>(f.width)));
    m.spatial.assign(f.height, std::vector<double>(f.width, 0.0));
    for (int i = 0; i < f.height; ++i) {
        for (int j = 0; j < f.width; ++j) {
            for (int o = 0; o < C; ++o) {
                double pre = p.conv_bias(o, 0);
                for (int c = 0; c < C; ++c) pre += p.conv_weights(o, c) * f(c, i, j) * emb[c];
                m.per_channel[o][i][j] = std::tanh(pre);
                m.spatial[i][j] += m.per_channel[o][i][j];
            }
        }
    }
    return m;
}

} // namespace

TEST_CASE("labels respect the membership table")
{
    LabelVocabulary vocab;
    CHECK(vocab.labels_for(0).group == 0);
    CHECK(vocab.labels_for(1).group == 0);
    CHECK(vocab.labels_for(2).group == 1);
    CHECK_THROWS_AS(vocab.labels_for(3), InvalidLabelError);
    CHECK_THROWS_AS(vocab.validate(ConditionLabels{1, 0, 2, 3}), InvalidLabelError);
    CHECK_THROWS_AS(vocab.validate(ConditionLabels{2, 2, 2, 3}), InvalidLabelError);
    CHECK_NOTHROW(vocab.validate(ConditionLabels{1, 2, 2, 3}));
}

TEST_CASE("embed_label closed forms")
{
    auto p = InjectionParams<double>::create(4, 4);
    for (int label = 0; label < 4; ++label) CHECK(embed_label(label, p).cwiseAbs().maxCoeff() == 0.0);

    p.embed_bias.setOnes();
    for (int label = 0; label < 4; ++label)
        for (int c = 0; c < 4; ++c) CHECK(embed_label(label, p)(c) == doctest::Approx(0.76159).epsilon(1e-5));

    p.embed_bias.setZero();
    p.embed_weights.setIdentity();
    const auto v = embed_label(2, p);
    for (int c = 0; c < 4; ++c) CHECK(v(c) == doctest::Approx(c == 2 ? std::tanh(1.0) : 0.0));

    CHECK_THROWS_AS(embed_label(4, p), InvalidLabelError);
    CHECK_THROWS_AS(embed_label(-1, p), InvalidLabelError);
}

TEST_CASE("spatial_broadcast copies the embedding to every position")
{
    Vector<double> e(2);
    e << 0.5, -0.5;
    const auto h = spatial_broadcast(e, 2, 2);
    CHECK(h.channels() == 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            CHECK(h(0, i, j) == 0.5);
            CHECK(h(1, i, j) == -0.5);
        }
    CHECK(spatial_broadcast(Vector<double>::Zero(3).eval(), 4, 5).data.cwiseAbs().maxCoeff() == 0.0);
    const auto s = spatial_broadcast(Vector<double>::Ones(3).eval(), 4, 5);
    CHECK((s.channels() == 3 && s.height == 4 && s.width == 5));
    CHECK_THROWS_AS(spatial_broadcast(e, 0, 2), InvalidShapeError);
    CHECK_THROWS_AS(spatial_broadcast(e, 2, -1), InvalidShapeError);
}

TEST_CASE("compute_relevance closed forms and loop oracle")
{
    const auto f = random_tensor(3, 4, 4, 11);
    const auto b = random_tensor(3, 4, 4, 12);
    auto p = InjectionParams<double>::create(2, 3);

    auto maps = compute_relevance(f, b, p);
    CHECK(maps.per_channel.data.cwiseAbs().maxCoeff() == 0.0);
    CHECK(maps.spatial.data.cwiseAbs().maxCoeff() == 0.0);

    p.conv_bias.setOnes();
    maps = compute_relevance(f, b, p);
    CHECK((maps.per_channel.data.array() - std::tanh(1.0)).abs().maxCoeff() < 1e-12);
    CHECK((maps.spatial.data.array() - 3 * std::tanh(1.0)).abs().maxCoeff() < 1e-12);

    const auto q = random_params(4, 2, 5);
    const auto feature = random_tensor(2, 3, 3, 6);
    const auto emb = oracle_embedding(3, q);
    Vector<double> e(2);
    e << emb[0], emb[1];
    const auto got = compute_relevance(feature, spatial_broadcast(e, 3, 3), q);
    const auto want = oracle_relevance(feature, emb, q);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(std::abs(got.per_channel(c, i, j) - want.per_channel[c][i][j]) < 1e-6);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(got.spatial(0, i, j) - want.spatial[i][j]) < 1e-6);

    CHECK_THROWS_AS(compute_relevance(f, random_tensor(3, 4, 5, 1), p), InvalidShapeError);
    CHECK_THROWS_AS(compute_relevance(random_tensor(2, 4, 4, 1), random_tensor(2, 4, 4, 2), p), InvalidShapeError);
}

TEST_CASE("apply_attention scales each position")
{
    Tensor3<double> f(1, 2, 2);
    f.data << 1, 2, 3, 4;
    Tensor3<double> s(1, 2, 2);
    s.data << 2, 0, -1, 1;
    const auto out = apply_attention(f, s);
    CHECK(out(0, 0, 0) == 2);
    CHECK(out(0, 0, 1) == 0);
    CHECK(out(0, 1, 0) == -3);
    CHECK(out(0, 1, 1) == 4);

    const auto g = random_tensor(3, 4, 4, 3);
    CHECK(apply_attention(g, Tensor3<double>::constant(1, 4, 4, 1.0)).data == g.data);
    CHECK(apply_attention(g, Tensor3<double>::zeros(1, 4, 4)).data.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(apply_attention(g, Tensor3<double>::zeros(1, 4, 3)), InvalidShapeError);
}

TEST_CASE("inject_condition closed forms and composed oracle")
{
    const auto f = random_tensor(3, 4, 4, 21);
    auto p = InjectionParams<double>::create(2, 3);
    CHECK(inject_condition(f, 1, p).data.cwiseAbs().maxCoeff() == 0.0);

    p.conv_bias.setOnes();
    const auto out = inject_condition(f, 1, p);
    CHECK(((out.data - 3 * std::tanh(1.0) * f.data).cwiseAbs().maxCoeff()) < 1e-12);

    const auto q = random_params(3, 2, 8);
    const auto feature = random_tensor(2, 3, 3, 9);
    const auto emb = oracle_embedding(1, q);
    const auto maps = oracle_relevance(feature, emb, q);
    const auto got = inject_condition(feature, 1, q);
    REQUIRE(got.same_shape(feature));
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(std::abs(got(c, i, j) - feature(c, i, j) * maps.spatial[i][j]) < 1e-6);

    // Composition of the library's own sub-operations.
    const auto composed =
        apply_attention(feature, compute_relevance(feature, spatial_broadcast(embed_label(1, q), 3, 3), q).spatial);
    CHECK((composed.data - got.data).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("relevance maps stay in range and the channel sum is consistent")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto q = random_params(3, 5, 100 + seed);
        const auto feature = random_tensor(5, 4, 6, 200 + seed, -3.0, 3.0);
        const auto maps = compute_relevance(feature, spatial_broadcast(embed_label(static_cast<int>(seed % 3), q), 4, 6), q);
        CHECK(maps.per_channel.data.cwiseAbs().maxCoeff() < 1.0);
        CHECK(maps.spatial.data.cwiseAbs().maxCoeff() < 5.0);
        const Matrix<double> sums = maps.per_channel.data.colwise().sum();
        CHECK((sums - maps.spatial.data).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(inject_condition(feature, 0, q).same_shape(feature));
    }
}

TEST_CASE("distinct labels give distinct outputs")
{
    const auto q = random_params(3, 4, 31);
    const auto feature = random_tensor(4, 3, 3, 32);
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b) {
            REQUIRE((embed_label(a, q) - embed_label(b, q)).cwiseAbs().maxCoeff() > 0);
            CHECK((inject_condition(feature, a, q).data - inject_condition(feature, b, q).data).cwiseAbs().maxCoeff() > 1e-8);
        }
}

TEST_CASE("injection gradients match central differences")
{
    for (bool rescale : {false, true}) {
        auto q = random_params(3, 3, 41);
        q.rescale_spatial = rescale;
        auto feature = random_tensor(3, 3, 4, 42);
        const auto weights = random_tensor(3, 3, 4, 43);
        const int label = 2;
        auto loss = [&] { return (inject_condition(feature, label, q).data.array() * weights.data.array()).sum(); };

        InjectionCache<double> cache;
        inject_forward(feature, label, q, &cache);
        auto grad = q.zeros_like();
        const auto dx = inject_backward(q, cache, weights, &grad);

        ParamList<double> params;
        ParamList<double> grads;
        q.collect(params, "q");
        grad.collect(grads, "g");
        CHECK(testing::worst_fd_error(params, grads, loss) < 1e-4);
        CHECK(testing::worst_fd_error(feature, dx, loss) < 1e-4);
    }
}

TEST_CASE("rescaled relevance divides the spatial map by the channel count")
{
    auto q = random_params(2, 4, 51);
    const auto feature = random_tensor(4, 3, 3, 52);
    const auto plain = inject_condition(feature, 0, q);
    q.rescale_spatial = true;
    const auto scaled = inject_condition(feature, 0, q);
    CHECK((plain.data / 4.0 - scaled.data).cwiseAbs().maxCoeff() < 1e-12);
}
