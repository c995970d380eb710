#include <gtest/gtest.h>

#include <cmath>

#include "nie/encoder.hpp"
#include "test_util.hpp"

using nie::EncoderConfig;
using nie::EncoderParams;
using nie::Tensor;
using nie::Vocabulary;

namespace {

EncoderConfig tiny_cfg(std::size_t vocab = 12) {
    EncoderConfig cfg;
    cfg.d1 = 8;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.max_len = 16;
    cfg.d3 = 4;
    cfg.vocab_size = vocab;
    return cfg;
}

}  // namespace

TEST(Encode, ShapeContractAndFiniteness) {
    EncoderConfig cfg = tiny_cfg();
    nie::DetRng rng(3);
    EncoderParams p = EncoderParams::init(cfg, rng);
    Tensor out = nie::encode(p, cfg, {Vocabulary::kCls, 5}, {0, 0});
    EXPECT_EQ(out.rows(), 2u);
    EXPECT_EQ(out.cols(), 8u);
    for (double v : out.data) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encode, Deterministic) {
    EncoderConfig cfg = tiny_cfg();
    nie::DetRng rng(3);
    EncoderParams p = EncoderParams::init(cfg, rng);
    Tensor a = nie::encode(p, cfg, {0, 5, 6, 7}, {0, 0, 0, 0});
    Tensor b = nie::encode(p, cfg, {0, 5, 6, 7}, {0, 0, 0, 0});
    EXPECT_EQ(a.data, b.data);  // bitwise
}

TEST(Encode, SeededInitIsDeterministic) {
    EncoderConfig cfg = tiny_cfg();
    nie::DetRng r1(42), r2(42);
    EncoderParams a = EncoderParams::init(cfg, r1);
    EncoderParams b = EncoderParams::init(cfg, r2);
    bool equal = true;
    a.visit([&](const std::string& name, Tensor& t) {
        Tensor* other = nullptr;
        b.visit([&](const std::string& n2, Tensor& t2) {
            if (n2 == name) other = &t2;
        });
        if (t.data != other->data) equal = false;
    });
    EXPECT_TRUE(equal);
}

TEST(Encode, PadMaskInvariance) {
    EncoderConfig cfg = tiny_cfg();
    nie::DetRng rng(9);
    EncoderParams p = EncoderParams::init(cfg, rng);
    for (int iter = 0; iter < 20; ++iter) {
        std::size_t len = 2 + rng.uniform_int(6);
        std::vector<int> ids{Vocabulary::kCls};
        for (std::size_t i = 1; i < len; ++i)
            ids.push_back(4 + static_cast<int>(rng.uniform_int(cfg.vocab_size - 4)));
        std::vector<char> mask(len, 0);
        Tensor base = nie::encode(p, cfg, ids, mask);

        std::vector<int> padded = ids;
        std::vector<char> padded_mask = mask;
        for (int k = 0; k < 5; ++k) {
            padded.push_back(Vocabulary::kPad);
            padded_mask.push_back(1);
        }
        Tensor with_pads = nie::encode(p, cfg, padded, padded_mask);
        for (std::size_t r = 0; r < len; ++r)
            for (std::size_t c = 0; c < cfg.d1; ++c)
                EXPECT_NEAR(base.at(r, c), with_pads.at(r, c), 1e-6);
    }
}

TEST(Encode, RejectsBadInput) {
    EncoderConfig cfg = tiny_cfg();
    nie::DetRng rng(5);
    EncoderParams p = EncoderParams::init(cfg, rng);
    EXPECT_THROW(nie::encode(p, cfg, {5, 1}, {0, 0}), std::invalid_argument);      // no CLS
    EXPECT_THROW(nie::encode(p, cfg, {0, 5}, {0}), std::invalid_argument);         // mask length
    EXPECT_THROW(nie::encode(p, cfg, {0, 99}, {0, 0}), std::invalid_argument);     // id range
    std::vector<int> too_long(cfg.max_len + 1, 4);
    too_long[0] = 0;
    EXPECT_THROW(nie::encode(p, cfg, too_long, std::vector<char>(too_long.size(), 0)),
                 std::invalid_argument);
}

TEST(ContextVector, EmptyNeighborhoodIsZero) {
    EncoderConfig cfg = tiny_cfg();
    nie::DetRng rng(7);
    EncoderParams p = EncoderParams::init(cfg, rng);
    Tensor c = nie::context_vector(p, cfg, {});
    EXPECT_EQ(c.size(), cfg.d2());
    for (double v : c.data) EXPECT_EQ(v, 0.0);
}

TEST(ContextVector, EqualsClsRow) {
    EncoderConfig cfg = tiny_cfg();
    nie::DetRng rng(7);
    EncoderParams p = EncoderParams::init(cfg, rng);
    std::vector<int> nb{5, 6, 7};
    Tensor c = nie::context_vector(p, cfg, nb);
    std::vector<int> ids{Vocabulary::kCls, 5, 6, 7};
    Tensor full = nie::encode(p, cfg, ids, std::vector<char>(4, 0));
    for (std::size_t i = 0; i < cfg.d2(); ++i) EXPECT_DOUBLE_EQ(c[i], full.at(0, i));
}

TEST(ContextVector, DifferentNeighborhoodsDiffer) {
    EncoderConfig cfg = tiny_cfg();
    nie::DetRng rng(8);
    EncoderParams p = EncoderParams::init(cfg, rng);
    Tensor a = nie::context_vector(p, cfg, {4, 5});
    Tensor b = nie::context_vector(p, cfg, {6, 7, 8});
    bool all_equal = true;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) all_equal = false;
    EXPECT_FALSE(all_equal);
}

TEST(GradientCheck, FullModelTinyConfig) {
    nie_test::TinyModelFixture fx;
    auto result = nie_test::gradient_check(fx);
    EXPECT_TRUE(result.ok) << "worst tensor " << result.worst_tensor << " rel " << result.worst_rel;
    EXPECT_LE(result.worst_rel, 1e-3);
}
