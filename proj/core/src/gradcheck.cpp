// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/gradcheck.hpp>

#include <chrono>
#include <cstdio>
#include <map>
#include <ostream>

namespace blrf {

std::vector<GradCheckCase> default_gradcheck_cases()
{
    GradCheckCase a;
    a.name = "D3-K2-W2";
    a.grid_res = 3;
    a.num_components = 2;
    a.submanifold_dim = 2;
    GradCheckCase b;
    b.name = "D4-K4-W2";
    b.grid_res = 4;
    b.num_components = 4;
    b.submanifold_dim = 2;
    return {a, b};
}

GradCheckOptions default_gradcheck_options()
{
    GradCheckOptions o;
    o.cases = default_gradcheck_cases();
    return o;
}

double relative_error(double analytic, double numeric, double floor)
{
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

bool GradCheckReport::passed() const
{
    for (const auto& e : entries) {
        if (!e.passed) return false;
    }
    return !entries.empty();
}

void GradCheckReport::print(std::ostream& out) const
{
    char line[256];
    std::snprintf(line, sizeof(line), "%-10s %-22s %7s %14s %12s  %s\n", "case", "parameter class", "count",
                  "max rel err", "max |grad|", "result");
    out << line;
    for (const auto& e : entries) {
        std::snprintf(line, sizeof(line), "%-10s %-22s %7zu %14.3e %12.3e  %s\n", e.case_name.c_str(),
                      e.parameter_class.c_str(), e.count, e.max_rel_error, e.max_abs_grad, e.passed ? "pass" : "FAIL");
        out << line;
    }
    std::snprintf(line, sizeof(line), "tolerance %.1e, %.2f s: %s\n", tolerance, seconds, passed() ? "PASS" : "FAIL");
    out << line;
}

namespace {

struct Accumulator {
    GradCheckEntry entry;

    void add(double analytic, double numeric, double floor)
    {
        entry.count += 1;
        entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic, numeric, floor));
        entry.max_abs_grad = std::max(entry.max_abs_grad, std::abs(analytic));
    }
};

const char* triple_class(std::size_t offset, int res)
{
    const auto d = static_cast<std::size_t>(res);
    if (offset < d) return "v_x";
    if (offset < 2 * d) return "v_y";
    if (offset < 3 * d) return "v_z";
    if (offset < 3 * d + d * d) return "M_yz";
    if (offset < 3 * d + 2 * d * d) return "M_xz";
    return "M_xy";
}

const char* kTripleClasses[] = {"v_x", "v_y", "v_z", "M_yz", "M_xz", "M_xy"};

void fill_uniform(std::span<double> values, Rng& rng, double scale)
{
    for (double& v : values) v = rng.uniform(-scale, scale);
}

struct Problem {
    SceneModel model;
    RayBatch batch;
    SamplingSpec sampling;
    TrainConfig config;
};

Problem make_problem(const GradCheckCase& c, std::uint64_t seed)
{
    FieldConfig fd;
    fd.grid_res = c.grid_res;
    fd.num_components = c.num_components;
    fd.submanifold_dim = c.submanifold_dim;
    fd.num_channels = 1;
    FieldConfig fc = fd;
    fc.num_channels = 3;
    Problem p{SceneModel{FactorizedField(fd, FieldKind::Density), FactorizedField(fc, FieldKind::Color),
                         TimeBasis::neural(c.submanifold_dim, c.basis_shape, seed + 1),
                         TimeBasis::neural(c.submanifold_dim, c.basis_shape, seed + 2)},
              {},
              {},
              {}};
    Rng rng(seed);
    fill_uniform(p.model.density.parameters(), rng, 0.8);
    fill_uniform(p.model.color.parameters(), rng, 0.8);
    // Nonzero biases keep hidden units away from the ReLU kink.
    fill_uniform(p.model.density_basis.parameters(), rng, 0.6);
    fill_uniform(p.model.color_basis.parameters(), rng, 0.6);

    p.sampling.near = 1.0;
    p.sampling.far = 4.0;
    p.sampling.n_samples = c.n_samples;
    p.sampling.perturb = true;
    p.sampling.background = {rng.uniform(), rng.uniform(), rng.uniform()};
    p.config.lambda1 = 0.1;
    p.config.lambda2 = 0.1;
    p.config.lambda_hp = 0.05;
    p.config.highpass_samples = 9;

    for (int f = 0; f < c.frames; ++f) {
        const double angle = 0.6 * f;
        const Vec3 eye{2.5 * std::sin(angle), 0.4, 2.5 * std::cos(angle)};
        const Camera cam = Camera::from_fov(c.image_size, c.image_size, 0.7, look_at(eye, {0, 0, 0}, {0, 1, 0}));
        p.batch.times.push_back(rng.uniform());
        for (int r = 0; r < c.image_size; ++r) {
            for (int col = 0; col < c.image_size; ++col) {
                p.batch.rays.push_back(ray_for_pixel(cam, r, col));
                p.batch.slot.push_back(f);
                p.batch.targets.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
                for (int s = 0; s < c.n_samples; ++s) p.batch.jitter.push_back(rng.uniform());
            }
        }
    }
    return p;
}

double total_loss(const Problem& p)
{
    return loss_and_grad(p.model, p.batch, p.config, p.sampling, nullptr).total;
}

template <typename Classify>
void check_block(Problem& p, std::span<double> params, std::span<const double> analytic, double step, double floor,
                 Classify classify, std::map<std::string, Accumulator>& acc)
{
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double lp = total_loss(p);
        params[i] = saved - step;
        const double lm = total_loss(p);
        params[i] = saved;
        acc[classify(i)].add(analytic[i], (lp - lm) / (2.0 * step), floor);
    }
}

void check_beta(const FactorizedField& field, const std::string& prefix, Rng& rng, const GradCheckOptions& o,
                std::map<std::string, Accumulator>& acc)
{
    const FieldConfig& cfg = field.config();
    for (int trial = 0; trial < 8; ++trial) {
        const Vec3 x{rng.uniform(), rng.uniform(), rng.uniform()};
        const double t = rng.uniform();
        std::vector<double> beta(cfg.submanifold_dim), up(cfg.num_channels);
        fill_uniform(beta, rng, 1.0);
        fill_uniform(up, rng, 1.0);
        const auto windows = window_weights(t, cfg.window_count(), cfg.sinc);
        FieldGradients scratch(field);
        const auto analytic = backward_field(field, x, beta, windows, up, scratch);
        for (std::size_t u = 0; u < beta.size(); ++u) {
            auto probe = [&](double delta) {
                std::vector<double> b = beta;
                b[u] += delta;
                const auto v = query_field_raw(field, b, t, x);
                double s = 0.0;
                for (std::size_t c = 0; c < v.size(); ++c) s += v[c] * up[c];
                return s;
            };
            acc[prefix + ".beta"].add(analytic[u], (probe(o.step) - probe(-o.step)) / (2.0 * o.step), o.floor);
        }
    }
}

void check_composite(Rng& rng, const GradCheckOptions& o, std::map<std::string, Accumulator>& acc)
{
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 12;
        std::vector<double> sig(n), depth(n);
        std::vector<Vec3> col(n);
        double h = 1.0;
        for (int i = 0; i < n; ++i) {
            sig[i] = rng.uniform(0.0, 3.0);
            col[i] = {rng.uniform(), rng.uniform(), rng.uniform()};
            h += rng.uniform(0.05, 0.3);
            depth[i] = h;
        }
        const double far = h + 0.2;
        const Vec3 bg{rng.uniform(), rng.uniform(), rng.uniform()};
        const Vec3 g{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const CompositeGrad cg = composite_backward(sig, col, depth, far, bg, g);
        auto value = [&]() { return dot(composite(sig, col, depth, far, bg).rgb, g); };
        for (int i = 0; i < n; ++i) {
            const double s0 = sig[i];
            sig[i] = s0 + o.step;
            const double lp = value();
            sig[i] = s0 - o.step;
            const double lm = value();
            sig[i] = s0;
            acc["composite.sigma"].add(cg.d_sigma[i], (lp - lm) / (2.0 * o.step), o.floor);
            for (int k = 0; k < 3; ++k) {
                const double c0 = col[i][k];
                col[i][k] = c0 + o.step;
                const double cp = value();
                col[i][k] = c0 - o.step;
                const double cm = value();
                col[i][k] = c0;
                acc["composite.color"].add(cg.d_color[i][k], (cp - cm) / (2.0 * o.step), o.floor);
            }
        }
    }
}

} // namespace

GradCheckReport run_gradcheck(const GradCheckOptions& options)
{
    const auto start = std::chrono::steady_clock::now();
    GradCheckReport report;
    report.tolerance = options.tolerance;
    for (std::size_t ci = 0; ci < options.cases.size(); ++ci) {
        const GradCheckCase& c = options.cases[ci];
        Problem p = make_problem(c, options.seed + 101 * ci);
        ModelGradients grads(p.model);
        loss_and_grad(p.model, p.batch, p.config, p.sampling, &grads);
        if (options.inject_sign_flip) {
            for (double& g : grads.density) g = -g;
        }

        std::map<std::string, Accumulator> acc;
        const std::size_t dts = p.model.density.config().triple_size();
        const std::size_t cts = p.model.color.config().triple_size();
        check_block(p, p.model.density.parameters(), grads.density, options.step, options.floor,
                    [&](std::size_t i) { return std::string("density.") + triple_class(i % dts, c.grid_res); }, acc);
        check_block(p, p.model.color.parameters(), grads.color, options.step, options.floor,
                    [&](std::size_t i) { return std::string("color.") + triple_class(i % cts, c.grid_res); }, acc);
        check_block(p, p.model.density_basis.parameters(), grads.density_basis, options.step, options.floor,
                    [](std::size_t) { return std::string("density_basis.mlp"); }, acc);
        check_block(p, p.model.color_basis.parameters(), grads.color_basis, options.step, options.floor,
                    [](std::size_t) { return std::string("color_basis.mlp"); }, acc);
        Rng rng(options.seed + 7919 * (ci + 1));
        check_beta(p.model.density, "density", rng, options, acc);
        check_beta(p.model.color, "color", rng, options, acc);
        check_composite(rng, options, acc);

        std::vector<std::string> order;
        for (const char* field : {"density", "color"}) {
            for (const char* cls : kTripleClasses) order.push_back(std::string(field) + "." + cls);
            order.push_back(std::string(field) + ".beta");
        }
        for (const char* name : {"density_basis.mlp", "color_basis.mlp", "composite.sigma", "composite.color"}) {
            order.push_back(name);
        }
        for (const auto& name : order) {
            auto it = acc.find(name);
            if (it == acc.end()) continue;
            GradCheckEntry e = it->second.entry;
            e.case_name = c.name;
            e.parameter_class = name;
            e.passed = e.max_rel_error < options.tolerance;
            report.entries.push_back(e);
        }
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace blrf
