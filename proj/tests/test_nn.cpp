#include <doctest.h>

#include <functional>

#include "textiq/nn.hpp"

using namespace textiq;
using nn::Mat;

namespace {

using MatD = Mat<double>;
using TapeD = nn::Tape<double>;
using RefD = TapeD::Ref;

MatD random_mat(Rng& rng, int r, int c, double scale = 1.0) {
  MatD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (rng.uniform() - 0.5);
  return m;
}

// Checks every parameter coordinate against central finite differences.
void check_gradients(nn::ParamStore<double>& params,
                     const std::function<double(bool)>& loss_with_grad, double tol = 1e-6) {
  params.zero_grads();
  loss_with_grad(true);
  const std::vector<double> analytic = params.flatten_grads();
  std::vector<double> theta = params.flatten_values();

  const double h = 1e-6;
  for (size_t i = 0; i < theta.size(); ++i) {
    const double save = theta[i];
    theta[i] = save + h;
    params.unflatten_values(theta);
    const double up = loss_with_grad(false);
    theta[i] = save - h;
    params.unflatten_values(theta);
    const double down = loss_with_grad(false);
    theta[i] = save;
    params.unflatten_values(theta);

    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
    INFO("coordinate ", i, " analytic ", analytic[i], " fd ", fd);
    CHECK(std::abs(fd - analytic[i]) / denom < tol * 1e3 + 1e-6);
  }
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("matmul + bias + gelu gradient") {
    Rng rng(1);
    nn::ParamStore<double> params;
    auto& w = params.add("w", 4, 3);
    auto& b = params.add("b", 1, 3);
    w.value = random_mat(rng, 4, 3);
    b.value = random_mat(rng, 1, 3);
    const MatD x = random_mat(rng, 5, 4);

    auto loss = [&](bool with_grad) {
      TapeD tape;
      RefD out = tape.gelu(
          tape.add_row_broadcast(tape.matmul(tape.constant(x), tape.leaf(w)), tape.leaf(b)));
      RefD l = tape.mean_all(tape.mul(out, out));
      if (with_grad) tape.backward(l);
      return l->value(0, 0);
    };
    check_gradients(params, loss);
  }

  TEST_CASE("softmax rows gradient") {
    Rng rng(2);
    nn::ParamStore<double> params;
    auto& w = params.add("w", 3, 6);
    w.value = random_mat(rng, 3, 6, 2.0);
    const MatD x = random_mat(rng, 4, 3);
    const MatD target = random_mat(rng, 4, 6, 0.3);

    auto loss = [&](bool with_grad) {
      TapeD tape;
      RefD probs = tape.softmax_rows(tape.matmul(tape.constant(x), tape.leaf(w)));
      RefD l = tape.weighted_sq_error(probs, target, MatD::Ones(4, 6));
      if (with_grad) tape.backward(l);
      return l->value(0, 0);
    };
    check_gradients(params, loss);
  }

  TEST_CASE("layernorm gradient including gain and offset") {
    Rng rng(3);
    nn::ParamStore<double> params;
    auto& w = params.add("w", 4, 6);
    auto& g = params.add("g", 1, 6);
    auto& b = params.add("b", 1, 6);
    w.value = random_mat(rng, 4, 6);
    g.value = MatD::Ones(1, 6) + random_mat(rng, 1, 6, 0.2);
    b.value = random_mat(rng, 1, 6, 0.2);
    const MatD x = random_mat(rng, 5, 4);

    auto loss = [&](bool with_grad) {
      TapeD tape;
      RefD h = tape.matmul(tape.constant(x), tape.leaf(w));
      RefD out = tape.layernorm_rows(h, tape.leaf(g), tape.leaf(b));
      RefD l = tape.mean_all(tape.mul(out, out));
      if (with_grad) tape.backward(l);
      return l->value(0, 0);
    };
    check_gradients(params, loss);
  }

  TEST_CASE("im2col conv gradient") {
    Rng rng(4);
    nn::ParamStore<double> params;
    auto& w1 = params.add("w1", 9, 3);
    auto& w2 = params.add("w2", 9 * 3, 2);
    w1.value = random_mat(rng, 9, 3);
    w2.value = random_mat(rng, 27, 2);
    const MatD x = random_mat(rng, 8 * 8, 1);

    auto loss = [&](bool with_grad) {
      TapeD tape;
      nn::ConvSpec c1{nn::GridShape{8, 8, 1}, 3, 2, 1, 3};
      RefD f = tape.tanh(tape.matmul(tape.im2col(tape.constant(x), c1), tape.leaf(w1)));
      nn::ConvSpec c2{c1.out(), 3, 1, 1, 2};
      RefD f2 = tape.matmul(tape.im2col(f, c2), tape.leaf(w2));
      RefD l = tape.mean_all(tape.mul(f2, f2));
      if (with_grad) tape.backward(l);
      return l->value(0, 0);
    };
    check_gradients(params, loss);
  }

  TEST_CASE("attention block gradient") {
    Rng rng(5);
    nn::ParamStore<double> params;
    auto& wq = params.add("wq", 6, 6);
    auto& wk = params.add("wk", 6, 6);
    auto& wv = params.add("wv", 6, 6);
    wq.value = random_mat(rng, 6, 6);
    wk.value = random_mat(rng, 6, 6);
    wv.value = random_mat(rng, 6, 6);
    const MatD queries = random_mat(rng, 5, 6);
    const MatD keys = random_mat(rng, 3, 6);

    auto loss = [&](bool with_grad) {
      TapeD tape;
      RefD q = tape.matmul(tape.constant(queries), tape.leaf(wq));
      RefD k = tape.matmul(tape.constant(keys), tape.leaf(wk));
      RefD v = tape.matmul(tape.constant(keys), tape.leaf(wv));
      RefD out = nullptr;
      for (int head = 0; head < 2; ++head) {
        RefD qh = tape.slice_cols(q, head * 3, 3);
        RefD kh = tape.slice_cols(k, head * 3, 3);
        RefD vh = tape.slice_cols(v, head * 3, 3);
        RefD att = tape.softmax_rows(
            tape.scale(tape.matmul(qh, tape.transpose(kh)), 1.0 / std::sqrt(3.0)));
        RefD oh = tape.matmul(att, vh);
        out = out ? tape.concat_cols({out, oh}) : oh;
      }
      RefD l = tape.mean_all(tape.mul(out, out));
      if (with_grad) tape.backward(l);
      return l->value(0, 0);
    };
    check_gradients(params, loss);
  }

  TEST_CASE("gru-style recurrence gradient") {
    Rng rng(6);
    nn::ParamStore<double> params;
    auto& wz = params.add("wz", 3, 4);
    auto& uz = params.add("uz", 4, 4);
    auto& wh = params.add("wh", 3, 4);
    auto& uh = params.add("uh", 4, 4);
    wz.value = random_mat(rng, 3, 4);
    uz.value = random_mat(rng, 4, 4);
    wh.value = random_mat(rng, 3, 4);
    uh.value = random_mat(rng, 4, 4);
    const MatD seq = random_mat(rng, 6, 3);

    auto loss = [&](bool with_grad) {
      TapeD tape;
      RefD s = tape.constant(seq);
      RefD ones = tape.constant(MatD::Ones(1, 4));
      RefD h = tape.constant(MatD::Zero(1, 4));
      std::vector<RefD> states;
      for (int t = 0; t < 6; ++t) {
        RefD xt = tape.slice_rows(s, t, 1);
        RefD z = tape.sigmoid(
            tape.add(tape.matmul(xt, tape.leaf(wz)), tape.matmul(h, tape.leaf(uz))));
        RefD cand = tape.tanh(
            tape.add(tape.matmul(xt, tape.leaf(wh)), tape.matmul(h, tape.leaf(uh))));
        RefD keep = tape.add(ones, tape.scale(z, -1.0));
        h = tape.add(tape.mul(keep, h), tape.mul(z, cand));
        states.push_back(h);
      }
      RefD all = tape.concat_rows(states);
      RefD l = tape.mean_all(tape.mul(all, all));
      if (with_grad) tape.backward(l);
      return l->value(0, 0);
    };
    check_gradients(params, loss);
  }

  TEST_CASE("upsample, exp and rate ops gradient") {
    Rng rng(7);
    nn::ParamStore<double> params;
    auto& w = params.add("w", 9, 2);
    w.value = random_mat(rng, 9, 2);
    const MatD x = random_mat(rng, 4 * 4, 1);
    const MatD weight = MatD::Constant(8 * 8, 2, 0.25).array().matrix();

    auto loss = [&](bool with_grad) {
      TapeD tape;
      nn::ConvSpec c{nn::GridShape{4, 4, 1}, 3, 1, 1, 2};
      RefD f = tape.matmul(tape.im2col(tape.constant(x), c), tape.leaf(w));
      RefD up = tape.upsample2x(tape.expm(f), 4, 4);
      RefD l = tape.rate_bits(up, weight);
      if (with_grad) tape.backward(l);
      return l->value(0, 0);
    };
    check_gradients(params, loss);
  }

  TEST_CASE("quality loss values and slopes") {
    TapeD tape;
    nn::ParamStore<double> params;
    auto& p = params.add("p", 1, 1);

    p.value(0, 0) = 0.55;
    RefD pred = tape.leaf(p);
    RefD l = tape.quality_loss(pred, 0.5, 0.1);
    CHECK(l->value(0, 0) == doctest::Approx(0.05).epsilon(1e-12));

    p.value(0, 0) = 0.6;
    TapeD tape2;
    RefD l2 = tape2.quality_loss(tape2.leaf(p), 0.2, 0.1);
    CHECK(l2->value(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
    params.zero_grads();
    tape2.backward(l2);
    CHECK(p.grad(0, 0) == doctest::Approx(2.0));  // both terms active, pred above gt

    // Loss-term switches.
    TapeD tape3;
    RefD l3 = tape3.quality_loss(tape3.leaf(p), 0.2, 0.1, true, false);
    CHECK(l3->value(0, 0) == doctest::Approx(0.4).epsilon(1e-12));
    TapeD tape4;
    RefD l4 = tape4.quality_loss(tape4.leaf(p), 0.2, 0.1, false, true);
    CHECK(l4->value(0, 0) == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("adam reduces a quadratic") {
    nn::ParamStore<double> params;
    auto& p = params.add("p", 1, 3);
    p.value << 2.0, -3.0, 1.5;
    nn::Adam<double> adam(nn::AdamConfig{0.05, 0.9, 0.999, 1e-8});
    for (int step = 0; step < 400; ++step) {
      params.zero_grads();
      TapeD tape;
      RefD x = tape.leaf(p);
      RefD l = tape.sum_all(tape.mul(x, x));
      tape.backward(l);
      adam.step(params);
    }
    CHECK(p.value.cwiseAbs().maxCoeff() < 0.05);
  }

  TEST_CASE("frozen parameters do not move") {
    nn::ParamStore<double> params;
    auto& p = params.add("p", 1, 2);
    p.value << 1.0, -1.0;
    p.trainable = false;
    nn::Adam<double> adam;
    params.zero_grads();
    TapeD tape;
    RefD x = tape.leaf(p);
    RefD l = tape.sum_all(tape.mul(x, x));
    tape.backward(l);
    adam.step(params);
    CHECK(p.value(0, 0) == 1.0);
    CHECK(p.grad(0, 0) == 0.0);  // constant leaf: no gradient flows
  }
}
