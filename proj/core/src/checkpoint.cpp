// Copyright Contributors to the blrf Project
// SPDX-License-Identifier: Apache-2.0

#include <blrf/checkpoint.hpp>

#include "binary_io.hpp"
#include "json_io.hpp"

#include <fstream>
#include <sstream>

namespace blrf {

using detail::json;

namespace {

constexpr char kFieldMagic[4] = {'B', 'L', 'R', 'F'};
constexpr char kTrailerMagic[4] = {'B', 'L', 'T', 'R'};
constexpr std::uint32_t kMaxHeader = 1u << 20;

void write_header(std::ostream& out, const char (&magic)[4], const json& header)
{
    out.write(magic, 4);
    detail::write_u32(out, kCheckpointVersion);
    const std::string text = header.dump();
    detail::write_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

json read_header(std::istream& in, const char (&magic)[4], const char* what)
{
    char m[4] = {};
    in.read(m, 4);
    if (!in || std::memcmp(m, magic, 4) != 0) throw IoError(std::string("bad magic in checkpoint ") + what);
    const std::uint32_t version = detail::read_u32(in);
    if (!in) throw IoError(std::string("truncated checkpoint ") + what);
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " + what);
    }
    const std::uint32_t len = detail::read_u32(in);
    if (!in || len > kMaxHeader) throw IoError(std::string("bad header length in checkpoint ") + what);
    std::string text(len, '\0');
    in.read(text.data(), len);
    if (!in) throw IoError(std::string("truncated checkpoint ") + what);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed checkpoint header in ") + what + ": " + e.what());
    }
}

void read_floats(std::istream& in, std::span<double> values, const char* what)
{
    detail::read_f32_array(in, values);
    if (!in) throw IoError(std::string("truncated checkpoint ") + what);
}

json adam_steps(const OptimizerState& s)
{
    return json::array({s.density.step, s.color.step, s.density_basis.step, s.color_basis.step});
}

} // namespace

void write_field_segment(std::ostream& out, const FactorizedField& field, const TimeBasis& basis)
{
    json b = {{"kind", to_string(basis.family())}, {"dim", basis.dim()}};
    if (basis.family() == BasisFamily::Neural) b["shape"] = detail::to_json(basis.shape());
    const json header = {{"field", detail::to_json(field.config())}, {"field_kind", to_string(field.kind())}, {"basis", b}};
    write_header(out, kFieldMagic, header);
    detail::write_f32_array(out, field.parameters());
    detail::write_f32_array(out, basis.parameters());
}

FactorizedField read_field_segment(std::istream& in, std::optional<TimeBasis>& basis)
{
    const json header = read_header(in, kFieldMagic, "field segment");
    try {
        FieldConfig config;
        detail::from_json(header.at("field"), config, "checkpoint field config");
        config.validate();
        FactorizedField field(config, field_kind_from_string(header.at("field_kind").get<std::string>()));
        const json& b = header.at("basis");
        const BasisFamily family = basis_family_from_string(b.at("kind").get<std::string>());
        const int dim = b.at("dim").get<int>();
        if (family == BasisFamily::Neural) {
            NeuralBasisShape shape;
            detail::from_json(b.at("shape"), shape, "checkpoint basis shape");
            basis = TimeBasis::neural(dim, shape, 0);
        } else {
            basis = TimeBasis::fixed(family, dim);
        }
        read_floats(in, field.parameters(), "field tensors");
        read_floats(in, basis->parameters(), "basis parameters");
        return field;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw IoError(std::string("invalid checkpoint header: ") + e.what());
    }
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt)
{
    ckpt.model.validate();
    write_field_segment(out, ckpt.model.density, ckpt.model.density_basis);
    write_field_segment(out, ckpt.model.color, ckpt.model.color_basis);
    const json trailer = {{"sampling", detail::to_json(ckpt.sampling)},
                          {"train", detail::to_json(ckpt.train)},
                          {"iteration", ckpt.optimizer.iteration},
                          {"adam_steps", adam_steps(ckpt.optimizer)}};
    write_header(out, kTrailerMagic, trailer);
    for (const AdamState* s :
         {&ckpt.optimizer.density, &ckpt.optimizer.color, &ckpt.optimizer.density_basis, &ckpt.optimizer.color_basis}) {
        detail::write_f32_array(out, s->m);
        detail::write_f32_array(out, s->v);
    }
    if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in)
{
    std::optional<TimeBasis> density_basis, color_basis;
    FactorizedField density = read_field_segment(in, density_basis);
    FactorizedField color = read_field_segment(in, color_basis);
    SceneModel model{std::move(density), std::move(color), std::move(*density_basis), std::move(*color_basis)};
    try {
        model.validate();
    } catch (const ConfigError& e) {
        throw IoError(std::string("inconsistent checkpoint: ") + e.what());
    }

    const json trailer = read_header(in, kTrailerMagic, "trailer");
    Checkpoint ckpt{std::move(model), {}, {}, {}};
    try {
        detail::from_json(trailer.at("sampling"), ckpt.sampling, "checkpoint sampling");
        detail::from_json(trailer.at("train"), ckpt.train, "checkpoint train config");
        ckpt.optimizer = make_optimizer_state(ckpt.model);
        ckpt.optimizer.iteration = trailer.at("iteration").get<std::int64_t>();
        const auto steps = trailer.at("adam_steps").get<std::vector<std::int64_t>>();
        if (steps.size() != 4) throw IoError("checkpoint trailer must list 4 Adam step counts");
        ckpt.optimizer.density.step = steps[0];
        ckpt.optimizer.color.step = steps[1];
        ckpt.optimizer.density_basis.step = steps[2];
        ckpt.optimizer.color_basis.step = steps[3];
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed checkpoint trailer: ") + e.what());
    } catch (const ConfigError& e) {
        throw IoError(std::string("invalid checkpoint trailer: ") + e.what());
    }
    for (AdamState* s :
         {&ckpt.optimizer.density, &ckpt.optimizer.color, &ckpt.optimizer.density_basis, &ckpt.optimizer.color_basis}) {
        read_floats(in, s->m, "Adam moments");
        read_floats(in, s->v, "Adam moments");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after checkpoint");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    try {
        return read_checkpoint(in);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::string checkpoint_header(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    return read_header(in, kFieldMagic, "field segment").dump();
}

} // namespace blrf
