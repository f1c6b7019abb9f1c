#include "pseg/model_io.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "pseg/errors.hpp"
#include "pseg/image_io.hpp"

namespace pseg {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  require_config(obj.is_object(), where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    require_config(known, where + ": unknown key '" + item.key() + "'");
  }
}

const json& need(const json& obj, const char* key, const std::string& where) {
  require_config(obj.contains(key), where + ": missing key '" + key + "'");
  return obj.at(key);
}

double need_number(const json& obj, const char* key, const std::string& where) {
  const json& v = need(obj, key, where);
  require_config(v.is_number(), where + ": '" + std::string(key) +
                                    "' must be a number");
  return v.get<double>();
}

int need_int(const json& obj, const char* key, const std::string& where) {
  const json& v = need(obj, key, where);
  require_config(v.is_number_integer(), where + ": '" + std::string(key) +
                                            "' must be an integer");
  return v.get<int>();
}

Lattice parse_dims(const json& doc, const std::string& where) {
  const json& dims = need(doc, "dims", where);
  require_config(dims.is_array() && !dims.empty() &&
                     dims.size() <= static_cast<std::size_t>(kMaxRank),
                 where + ": dims must list 1 to 3 extents");
  std::vector<int> extents;
  for (const json& d : dims) {
    require_config(d.is_number_integer() && d.get<int>() >= 1,
                   where + ": dims entries must be positive integers");
    extents.push_back(d.get<int>());
  }
  return Lattice(extents);
}

NoiseSpec parse_noise(const json& doc, const std::string& where) {
  check_keys(doc, {"family", "sigma"}, where);
  std::string family = need(doc, "family", where).get<std::string>();
  NoiseSpec noise;
  if (family == "gaussian") {
    noise.family = NoiseFamily::kGaussian;
  } else if (family == "uniform") {
    noise.family = NoiseFamily::kUniform;
  } else {
    throw ConfigError(where + ": family must be 'gaussian' or 'uniform'");
  }
  noise.sigma = need_number(doc, "sigma", where);
  require_config(noise.sigma >= 0.0, where + ": sigma must be >= 0");
  return noise;
}

std::int8_t parse_label(const json& v, const std::string& where) {
  require_config(v.is_number_integer() &&
                     (v.get<int>() == 1 || v.get<int>() == -1),
                 where + ": label must be +1 or -1");
  return static_cast<std::int8_t>(v.get<int>());
}

// A component table: [{weight, mean, label}, ...]. Means are scalars in the
// block form and vectors in the general pointwise form.
std::vector<MixtureComponent> parse_components(const json& arr, bool vector_means,
                                               const std::string& where) {
  require_config(arr.is_array() && !arr.empty(),
                 where + " must be a nonempty array");
  std::vector<MixtureComponent> components;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    std::string cw = where + "[" + std::to_string(k) + "]";
    const json& c = arr[k];
    check_keys(c, {"weight", "mean", "label"}, cw);
    MixtureComponent comp;
    comp.weight = need_number(c, "weight", cw);
    const json& mean = need(c, "mean", cw);
    if (vector_means && mean.is_array()) {
      for (const json& m : mean) {
        require_config(m.is_number(), cw + ": mean entries must be numbers");
        comp.mean.push_back(m.get<double>());
      }
    } else {
      require_config(mean.is_number(), cw + ": mean must be a number");
      comp.mean.push_back(mean.get<double>());
    }
    comp.label = parse_label(need(c, "label", cw), cw);
    components.push_back(std::move(comp));
  }
  return components;
}

json components_json(const std::vector<MixtureComponent>& components) {
  json arr = json::array();
  for (const MixtureComponent& c : components) {
    json mean = c.mean.size() == 1 ? json(c.mean[0]) : json(c.mean);
    arr.push_back(json{{"weight", c.weight}, {"mean", std::move(mean)},
                       {"label", static_cast<int>(c.label)}});
  }
  return arr;
}

json noise_json(const NoiseSpec& noise) {
  return json{{"family", noise.family == NoiseFamily::kGaussian ? "gaussian"
                                                                : "uniform"},
              {"sigma", noise.sigma}};
}

GenerativeModel parse_block_model(const json& doc,
                                  const std::string& where) {
  check_keys(doc, {"type", "dims", "block_side", "noise", "blocks"}, where);
  Lattice lattice = parse_dims(doc, where);
  int block_side = need_int(doc, "block_side", where);
  NoiseSpec noise = parse_noise(need(doc, "noise", where), where + ".noise");
  const json& blocks = need(doc, "blocks", where);
  require_config(blocks.is_array() && !blocks.empty(),
                 where + ": blocks must be a nonempty array");
  std::vector<std::vector<MixtureComponent>> tables;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    tables.push_back(parse_components(
        blocks[b], false, where + ".blocks[" + std::to_string(b) + "]"));
  }
  return build_block_model(lattice, block_side, tables, noise);
}

GenerativeModel parse_pointwise_model(const json& doc,
                                      const std::string& where) {
  check_keys(doc,
             {"type", "dims", "rho_min", "patch_radius", "jigsaw_radii",
              "jigsaw_offsets", "noise", "pixels"},
             where);
  Lattice lattice = parse_dims(doc, where);
  NoiseSpec noise = parse_noise(need(doc, "noise", where), where + ".noise");

  int patch_radius = need_int(doc, "patch_radius", where);
  require_config(patch_radius >= 0, where + ": patch_radius must be >= 0");
  PatchShape patch = patch_radius == 0
                         ? PatchShape::single_pixel()
                         : PatchShape::centered_box(lattice.rank(), patch_radius);

  require_config(doc.contains("jigsaw_radii") != doc.contains("jigsaw_offsets"),
                 where +
                     ": give exactly one of 'jigsaw_radii' or 'jigsaw_offsets'");
  Neighborhood jigsaw = [&] {
    if (doc.contains("jigsaw_radii")) {
      const json& radii_doc = doc.at("jigsaw_radii");
      require_config(radii_doc.is_array() && !radii_doc.empty(),
                     where + ": jigsaw_radii must be a nonempty array");
      std::vector<int> radii;
      for (const json& r : radii_doc) {
        require_config(r.is_number_integer() && r.get<int>() >= 0,
                       where + ": jigsaw_radii entries must be >= 0");
        radii.push_back(r.get<int>());
      }
      return Neighborhood::box(radii);
    }
    // Explicit offsets can describe center-free neighborhoods, which is the
    // only way a stored model can fail the self-consistency check.
    const json& offsets_doc = doc.at("jigsaw_offsets");
    require_config(offsets_doc.is_array() && !offsets_doc.empty(),
                   where + ": jigsaw_offsets must be a nonempty array");
    std::vector<Coord> offsets;
    for (const json& o : offsets_doc) {
      require_config(o.is_array() &&
                         o.size() == static_cast<std::size_t>(lattice.rank()),
                     where + ": each jigsaw offset needs one entry per axis");
      Coord c{};
      for (std::size_t a = 0; a < o.size(); ++a) {
        require_config(o[a].is_number_integer(),
                       where + ": jigsaw offset entries must be integers");
        c[a] = o[a].get<int>();
      }
      offsets.push_back(c);
    }
    return Neighborhood::explicit_offsets(std::move(offsets));
  }();

  const json& pixels = need(doc, "pixels", where);
  require_config(pixels.is_array() && pixels.size() == lattice.size(),
                 where + ": pixels must hold one component table per pixel");
  std::vector<PixelMixtureModel> models;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    PixelMixtureModel m;
    m.components = parse_components(
        pixels[i], true, where + ".pixels[" + std::to_string(i) + "]");
    m.noise = noise;
    models.push_back(std::move(m));
  }
  double rho_min = need_number(doc, "rho_min", where);
  return PointwiseModel(lattice, patch, std::move(models), rho_min, jigsaw);
}

LabelImage parse_inline_labels(const json& doc, const std::string& where) {
  check_keys(doc, {"dims", "values"}, where);
  Lattice lattice = parse_dims(doc, where);
  const json& values = need(doc, "values", where);
  require_config(values.is_array() && values.size() == lattice.size(),
                 where + ": values must hold one label per pixel");
  std::vector<std::int8_t> labels;
  for (const json& v : values) labels.push_back(parse_label(v, where));
  return LabelImage(lattice, std::move(labels));
}

GenerativeModel parse_latent_source_model(const json& doc,
                                          const std::filesystem::path& base_dir,
                                          const std::string& where) {
  check_keys(doc,
             {"type", "alpha", "distance", "label_patch_side", "intensity",
              "noise", "sources"},
             where);
  double alpha = need_number(doc, "alpha", where);
  std::string distance_name = need(doc, "distance", where).get<std::string>();
  LabelDistance distance;
  if (distance_name == "hamming") {
    distance = LabelDistance::kHamming;
  } else if (distance_name == "soft_dice") {
    distance = LabelDistance::kSoftDiceComplement;
  } else {
    throw ConfigError(where + ": distance must be 'hamming' or 'soft_dice'");
  }
  NoiseSpec noise = parse_noise(need(doc, "noise", where), where + ".noise");

  const json& intensity = need(doc, "intensity", where);
  check_keys(intensity, {"foreground", "background"}, where + ".intensity");
  double fg = need_number(intensity, "foreground", where + ".intensity");
  double bg = need_number(intensity, "background", where + ".intensity");

  int patch_side = need_int(doc, "label_patch_side", where);
  require_config(patch_side >= 1 && patch_side % 2 == 1,
                 where + ": label_patch_side must be odd and >= 1");

  const json& sources_doc = need(doc, "sources", where);
  require_config(sources_doc.is_array() && !sources_doc.empty(),
                 where + ": sources must be a nonempty array");
  std::vector<LatentSource> sources;
  for (std::size_t g = 0; g < sources_doc.size(); ++g) {
    std::string sw = where + ".sources[" + std::to_string(g) + "]";
    const json& s = sources_doc[g];
    check_keys(s, {"probability", "path", "labels"}, sw);
    LatentSource source;
    source.probability = need_number(s, "probability", sw);
    bool has_path = s.contains("path");
    bool has_inline = s.contains("labels");
    require_config(has_path != has_inline,
                   sw + ": give exactly one of 'path' or 'labels'");
    if (has_path) {
      std::filesystem::path p = s.at("path").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      source.labels = read_label_image(p);
    } else {
      source.labels = parse_inline_labels(s.at("labels"), sw + ".labels");
    }
    sources.push_back(std::move(source));
  }

  int rank = sources.front().labels.lattice.rank();
  PatchShape label_patch =
      patch_side == 1 ? PatchShape::single_pixel()
                      : PatchShape::centered_box(rank, (patch_side - 1) / 2);
  return LatentSourceModel(std::move(sources), alpha, distance, label_patch,
                           fg, bg, noise);
}

// Recognizes single-pixel shapes and centered boxes; anything else has no
// JSON spelling.
int box_radius_of(const PatchShape& patch, int rank) {
  if (patch == PatchShape::single_pixel(patch.boundary)) return 0;
  for (int r = 1; r <= 16; ++r) {
    if (patch == PatchShape::centered_box(rank, r, patch.boundary)) return r;
  }
  throw ContractViolation("model save: patch shape has no JSON form");
}

json pointwise_json(const PointwiseModel& model) {
  json pixels = json::array();
  for (const PixelMixtureModel& m : model.pixel_models()) {
    pixels.push_back(components_json(m.components));
  }
  json out{{"type", "pointwise"},
           {"dims", model.lattice().dims()},
           {"rho_min", model.rho_min()},
           {"patch_radius", box_radius_of(model.patch(), model.lattice().rank())},
           {"noise", noise_json(model.noise())},
           {"pixels", std::move(pixels)}};
  const Neighborhood& jigsaw = model.jigsaw_neighborhood();
  if (jigsaw.is_box()) {
    out["jigsaw_radii"] = jigsaw.radii();
  } else {
    int rank = model.lattice().rank();
    json offsets = json::array();
    for (const Coord& off : jigsaw.offsets(rank)) {
      json one = json::array();
      for (int a = 0; a < rank; ++a) one.push_back(off[a]);
      offsets.push_back(std::move(one));
    }
    out["jigsaw_offsets"] = std::move(offsets);
  }
  return out;
}

json latent_source_json(const LatentSourceModel& model) {
  json sources = json::array();
  for (const LatentSource& s : model.sources()) {
    json values = json::array();
    for (std::int8_t l : s.labels.labels) values.push_back(static_cast<int>(l));
    sources.push_back(json{
        {"probability", s.probability},
        {"labels",
         json{{"dims", s.labels.lattice.dims()}, {"values", std::move(values)}}}});
  }
  int side = 2 * box_radius_of(model.label_patch(), model.lattice().rank()) + 1;
  return json{{"type", "latent_source"},
              {"alpha", model.alpha()},
              {"distance", model.distance() == LabelDistance::kHamming
                               ? "hamming"
                               : "soft_dice"},
              {"label_patch_side", side},
              {"intensity",
               json{{"foreground", model.foreground_intensity()},
                    {"background", model.background_intensity()}}},
              {"noise", noise_json(model.noise())},
              {"sources", std::move(sources)}};
}

}  // namespace

GenerativeModel parse_model_json(const json& doc,
                                 const std::filesystem::path& base_dir) {
  require_config(doc.is_object(), "model: document must be a JSON object");
  std::string type = need(doc, "type", "model").get<std::string>();
  if (type == "block") return parse_block_model(doc, "model");
  if (type == "pointwise") return parse_pointwise_model(doc, "model");
  if (type == "latent_source") {
    return parse_latent_source_model(doc, base_dir, "model");
  }
  throw ConfigError("model: type must be 'block', 'pointwise', or 'latent_source'");
}

GenerativeModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  require_config(in.good(), "cannot open model file: " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": invalid JSON: " + e.what());
  }
  return parse_model_json(doc, file.parent_path());
}

json model_json(const GenerativeModel& model) {
  if (const auto* pw = std::get_if<PointwiseModel>(&model)) {
    return pointwise_json(*pw);
  }
  return latent_source_json(std::get<LatentSourceModel>(model));
}

void save_model(const std::filesystem::path& file, const GenerativeModel& model) {
  std::ofstream out(file, std::ios::trunc);
  require_config(out.good(), "cannot open model file for writing: " + file.string());
  out << model_json(model).dump(2) << '\n';
  require_config(out.good(), "model write failed: " + file.string());
}

}  // namespace pseg
