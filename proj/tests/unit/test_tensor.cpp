#include <doctest.h>

#include "fixtures.hpp"
#include "tdir/errors.hpp"
#include "tdir/image.hpp"
#include "tdir/rng.hpp"
#include "tdir/tensor.hpp"

using namespace tdir;

TEST_CASE("tensor arithmetic and shape checks") {
    Tensor a(Shape{2, 2, 2}, 1.5);
    Tensor b(Shape{2, 2, 2}, 0.5);
    CHECK((a + b)[3] == 2.0);
    CHECK((a - b)[7] == 1.0);
    CHECK((a * 2.0)[0] == 3.0);
    CHECK_THROWS_AS(a += Tensor(Shape{2, 2}), InvalidArgument);
    CHECK(shape_string(a.shape()) == "[2x2x2]");
    CHECK(Tensor(Shape{3, 4}).reshaped({12}).rank() == 1);
    CHECK_THROWS_AS(Tensor(Shape{3, 4}).reshaped({5}), InvalidArgument);
}

TEST_CASE("bit_identical distinguishes signed zero") {
    Tensor a(Shape{1}, 0.0), b(Shape{1}, -0.0);
    CHECK(a == b);
    CHECK_FALSE(bit_identical(a, b));
}

TEST_CASE("crop and concat") {
    const Tensor t = testing::random_tensor({2, 5, 6}, 1);
    const Tensor c = crop(t, 1, 2, 3, 3);
    CHECK(c.shape() == Shape{2, 3, 3});
    CHECK(c.at(1, 2, 0) == t.at(1, 3, 2));
    const Tensor parts[] = {t, c.reshaped({2, 3, 3})};
    CHECK_THROWS_AS(concat_channels(parts), InvalidArgument);
    const Tensor same[] = {t, t};
    CHECK(concat_channels(same).channels() == 4);
}

TEST_CASE("reflect_pad mirrors without repeating the edge") {
    Tensor t(Shape{1, 1, 3}, std::vector<double>{1, 2, 3});
    const Tensor p = reflect_pad(t, 1, 8);
    const std::vector<double> expect{1, 2, 3, 2, 1, 2, 3, 2};
    for (int x = 0; x < 8; ++x) CHECK(p.at(0, 0, x) == expect[static_cast<std::size_t>(x)]);
    Tensor single(Shape{1, 1, 1}, 7.0);
    CHECK(reflect_pad(single, 3, 3).at(0, 2, 2) == 7.0);
}

TEST_CASE("domain conversion round trip") {
    Image img(3, 2, 2, ValueDomain::Unit, 0.25);
    const Image s = convert(img, ValueDomain::SignedUnit);
    CHECK(s.pixels[0] == doctest::Approx(-0.5));
    const Image b = convert(s, ValueDomain::Byte);
    CHECK(b.pixels[0] == doctest::Approx(63.75));
    CHECK(convert(b, ValueDomain::Unit).pixels[0] == doctest::Approx(0.25));
}

TEST_CASE("rng streams are reproducible and distinct") {
    Rng a = derive_rng(5, {1, 2}), b = derive_rng(5, {1, 2}), c = derive_rng(5, {1, 3});
    CHECK(a() == b());
    CHECK(a() != c());
    Rng d = derive_rng(9);
    (void)standard_normal(d);
    const std::string state = save_rng_state(d);
    Rng e = load_rng_state(state);
    CHECK(standard_normal(d) == standard_normal(e));
    CHECK_THROWS(load_rng_state("garbage"));
}
