#include "../common/manifest.hpp"
#include "tsc/error.hpp"
#include "tsc/models.hpp"

namespace tsc::models {

namespace {
constexpr const char* kFormat = "tsc-model-1";
}

void save_model(const TrainedModel& model, const std::filesystem::path& manifest) {
  const auto& spec = model.network.spec();
  const auto state = model.network.state();
  detail::Manifest m;
  m.add("format", kFormat);
  m.add("architecture", to_string(spec.architecture));
  m.add("length", std::uint64_t(spec.length));
  m.add("dims", std::uint64_t(spec.dims));
  m.add("classes", std::uint64_t(spec.classes));
  m.add("filter_length", std::uint64_t(spec.filter_length));
  m.add("pool_factor", std::uint64_t(spec.pool_factor));
  m.add("seed", model.seed);
  m.add("epochs", std::uint64_t(model.epochs));
  m.add("best_epoch", std::uint64_t(model.best_epoch));
  m.add("dataset", model.dataset);
  m.add("parameters", std::uint64_t(state.size()));
  m.add("blob", detail::blob_path(manifest).filename().string());
  for (const auto& label : model.vocabulary) m.add("class", label);
  if (model.slicing) {
    m.add("slice_fraction", model.slicing->fraction);
    m.add("slice_stride", std::uint64_t(model.slicing->stride));
    for (double w : model.slicing->warps) m.add("slice_warp", w);
  }
  for (const auto& line : layer_table(spec.root)) m.add("layer", line);
  m.write(manifest);
  detail::write_blob(detail::blob_path(manifest), state);
}

TrainedModel load_model(const std::filesystem::path& manifest) {
  const auto m = detail::Manifest::read(manifest);
  if (m.get("format") != kFormat) throw ParseError("manifest: unsupported format '" + m.get("format") + "'");

  const auto arch = parse_architecture(m.get("architecture"));
  auto spec = build(arch, m.u64("length"), m.u64("dims"), m.u64("classes"), m.u64("filter_length"),
                    m.u64("pool_factor"));
  if (layer_table(spec.root) != m.all("layer")) {
    throw IntegrityError("manifest layer table does not match the " + to_string(arch) + " architecture");
  }

  TrainedModel model{Network(std::move(spec), 0), m.u64("seed"),     m.u64("epochs"), m.u64("best_epoch"),
                     m.has("dataset") ? m.get("dataset") : "", m.all("class"), std::nullopt};
  if (m.has("slice_fraction")) {
    std::vector<double> warps;
    for (const auto& w : m.all("slice_warp")) warps.push_back(detail::parse_double(w, "slice_warp"));
    model.slicing = data::SlicingConfig{m.f64("slice_fraction"), m.u64("slice_stride"), warps};
  }
  model.network.load_state(detail::read_blob(manifest.parent_path() / m.get("blob"), m.u64("parameters")));
  return model;
}

}  // namespace tsc::models
