#include "vw/toy/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "vw/core/error.hpp"

namespace vw::toy {

const std::vector<std::string>& vocabulary_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w = kColors;
    w.insert(w.end(), kShapes.begin(), kShapes.end());
    for (const char* s : {"a", "an", "the", "photo", "of", "picture", "image", "drawing", "rendering", "this", "is",
                          "good", "small", "big", "and", "with", "on", "shape", "object", "there", "in", "one"})
      w.push_back(s);
    for (const char* s :
         {"strawberry", "harp",     "sturgeon", "gorilla", "throne",  "pelican",   "honeycomb", "barrel",
          "sombrero",   "scuba",    "diver",    "hat",     "cat",     "vase",      "duck",      "candle",
          "sneaker",    "backpack", "plush",    "boot",    "clock",   "sunglasses", "dog",      "toy",
          "laptop",     "scissors", "donut",    "bear",    "cup",     "bottle",    "umbrella",  "remote",
          "airplane",   "bicycle",  "bird",     "boat",    "person",  "train",     "car",       "horse",
          "cow",        "sloth",    "grey",     "pink",    "fancy",   "colorful",  "apple",     "banana",
          "chair",      "table",    "lamp",     "kite",    "guitar",  "piano",     "rocket",    "tree",
          "flower",     "house",    "bridge",   "mountain", "river",  "cloud",     "moon",      "star"})
      w.push_back(s);
    return w;
  }();
  return words;
}

std::string concept_name(const std::string& color, const std::string& shape) { return color + " " + shape; }

std::vector<std::string> all_concepts() {
  std::vector<std::string> out;
  for (const auto& c : kColors)
    for (const auto& s : kShapes) out.push_back(concept_name(c, s));
  return out;
}

std::vector<std::string> held_in_concepts(const std::vector<ColorShape>& holdout) {
  std::set<std::string> held;
  for (const auto& [c, s] : holdout) held.insert(concept_name(c, s));
  std::vector<std::string> out;
  for (const auto& n : all_concepts())
    if (!held.count(n)) out.push_back(n);
  return out;
}

std::vector<tasks::Box> ShapeScene::boxes() const {
  std::vector<tasks::Box> out;
  for (const auto& o : objects) {
    tasks::Box b = o.box;
    b.class_label = o.label();
    out.push_back(b);
  }
  return out;
}

std::vector<bool> shape_mask(const std::string& shape, int s) {
  std::vector<bool> m(static_cast<size_t>(s) * s, false);
  const double half = s / 2.0;
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      const double dx = c + 0.5 - half, dy = r + 0.5 - half;
      bool on = false;
      if (shape == "circle") on = dx * dx + dy * dy <= half * half;
      else if (shape == "square") on = true;
      else if (shape == "triangle") on = std::abs(dx) <= (r + 1) / 2.0;
      else if (shape == "cross") on = std::abs(dx) < s / 4.0 || std::abs(dy) < s / 4.0;
      else throw Error(ErrorCode::kInvalidInput, "unknown shape '" + shape + "'");
      m[static_cast<size_t>(r) * s + c] = on;
    }
  }
  return m;
}

namespace {

std::array<int, 3> base_color(const std::string& color) {
  if (color == "red") return {230, 40, 40};
  if (color == "green") return {40, 200, 60};
  if (color == "blue") return {50, 80, 235};
  if (color == "yellow") return {230, 220, 40};
  if (color == "purple") return {165, 60, 205};
  if (color == "cyan") return {40, 215, 215};
  throw Error(ErrorCode::kInvalidInput, "unknown color '" + color + "'");
}

}  // namespace

Image render_scene(const ShapeScene& scene, std::mt19937_64* color_jitter) {
  Image img(scene.width, scene.height);
  for (const auto& o : scene.objects) {
    auto rgb = base_color(o.color);
    if (color_jitter) {
      std::uniform_int_distribution<int> j(-12, 12);
      for (int& v : rgb) v = std::clamp(v + j(*color_jitter), 0, 255);
    }
    const int s = static_cast<int>(o.box.width());
    const int x0 = static_cast<int>(o.box.x_min), y0 = static_cast<int>(o.box.y_min);
    if (x0 < 0 || y0 < 0 || x0 + s > scene.width || y0 + s > scene.height)
      throw Error(ErrorCode::kInvalidInput, "render: object outside the canvas");
    const auto mask = shape_mask(o.shape, s);
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) {
        if (!mask[static_cast<size_t>(r) * s + c]) continue;
        std::uint8_t* px = img.at(x0 + c, y0 + r);
        for (int k = 0; k < 3; ++k) px[k] = static_cast<std::uint8_t>(rgb[k]);
      }
    }
  }
  return img;
}

namespace {

// Top-left corner on the even grid so that every object aligns with the
// detector's anchor lattice.
tasks::Box place(int size, int width, int height, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> px(0, (width - size) / 2), py(0, (height - size) / 2);
  const double x = 2 * px(rng), y = 2 * py(rng);
  return {x, y, x + size, y + size, std::nullopt};
}

bool overlaps(const tasks::Box& a, const std::vector<SceneObject>& objs) {
  for (const auto& o : objs)
    if (tasks::iou(a, o.box) > 0) return true;
  return false;
}

}  // namespace

ShapeScene sample_scene(const ColorShape& primary, const std::vector<ColorShape>& distractor_pool,
                        std::mt19937_64& rng, const SceneOptions& options) {
  ShapeScene scene;
  std::uniform_int_distribution<size_t> pick_size(0, options.primary_sizes.size() - 1);
  const int size = options.primary_sizes[pick_size(rng)];
  scene.objects.push_back({primary.second, primary.first, place(size, scene.width, scene.height, rng)});

  std::vector<ColorShape> pool;
  for (const auto& cs : distractor_pool)
    if (cs != primary) pool.push_back(cs);
  std::uniform_int_distribution<int> count(0, options.max_distractors);
  const int n = pool.empty() ? 0 : count(rng);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    const ColorShape& cs = pool[pick(rng)];
    bool placed = false;
    for (int attempt = 0; attempt < options.max_retries && !placed; ++attempt) {
      tasks::Box b = place(options.distractor_size, scene.width, scene.height, rng);
      if (!overlaps(b, scene.objects)) {
        scene.objects.push_back({cs.second, cs.first, b});
        placed = true;
      }
    }
    if (!placed) throw Error(ErrorCode::kInfeasiblePlacement, "sample_scene: no free spot for a distractor");
  }
  return scene;
}

namespace {

std::vector<ColorShape> pairs_of(const std::vector<std::string>& names) {
  std::vector<ColorShape> out;
  for (const auto& n : names) {
    const auto sp = n.find(' ');
    out.emplace_back(n.substr(0, sp), n.substr(sp + 1));
  }
  return out;
}

datasets::ManifestEntry emit(const std::filesystem::path& root, const std::string& rel, const ShapeScene& scene,
                             std::mt19937_64& rng, datasets::Split split) {
  const Image img = render_scene(scene, &rng);
  std::filesystem::create_directories((root / rel).parent_path());
  write_png(root / rel, img);
  datasets::ManifestEntry e;
  e.image_path = rel;
  e.boxes = scene.boxes();
  e.class_label = datasets::class_from_largest_box(e.boxes);
  e.concept_name = e.class_label;
  e.split = split;
  return e;
}

std::string image_name(const char* dir, const char* split, int i) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "images/%s/%s/%06d.png", dir, split, i);
  return buf;
}

}  // namespace

ShapesDataset generate_shapes_dataset(const std::filesystem::path& root, const ShapesDatasetOptions& options) {
  for (const auto& [c, s] : options.holdout) {
    if (std::find(kColors.begin(), kColors.end(), c) == kColors.end() ||
        std::find(kShapes.begin(), kShapes.end(), s) == kShapes.end())
      throw Error(ErrorCode::kInvalidInput, "holdout pair '" + c + " " + s + "' is not a color and shape");
  }
  const auto held_in = pairs_of(held_in_concepts(options.holdout));
  const auto every = pairs_of(all_concepts());
  std::mt19937_64 rng(options.seed);

  ShapesDataset out;
  out.pretrain.dataset_id = "toy-shapes-pretrain";
  out.concepts.dataset_id = "toy-shapes";
  std::uniform_int_distribution<size_t> pick(0, held_in.size() - 1);
  for (int i = 0; i < options.n_train + options.n_eval; ++i) {
    const bool train = i < options.n_train;
    const ShapeScene scene = sample_scene(held_in[pick(rng)], held_in, rng, options.scene);
    const int idx = train ? i : i - options.n_train;
    out.pretrain.entries.push_back(emit(root, image_name("pretrain", train ? "train" : "eval", idx), scene, rng,
                                        train ? datasets::Split::kTrain : datasets::Split::kEval));
  }
  int counter = 0;
  for (const auto& cs : every) {
    for (int i = 0; i < options.concept_train_per + options.concept_eval_per; ++i) {
      const bool train = i < options.concept_train_per;
      const ShapeScene scene = sample_scene(cs, every, rng, options.scene);
      out.concepts.entries.push_back(emit(root, image_name("concepts", train ? "train" : "eval", counter++), scene,
                                          rng, train ? datasets::Split::kTrain : datasets::Split::kEval));
    }
  }
  datasets::write_manifest(root / kPretrainManifest, out.pretrain);
  datasets::write_manifest(root / kConceptManifest, out.concepts);
  return out;
}

ShapesDataset load_shapes_dataset(const std::filesystem::path& root) {
  return {datasets::read_manifest(root / kPretrainManifest), datasets::read_manifest(root / kConceptManifest)};
}

}  // namespace vw::toy
