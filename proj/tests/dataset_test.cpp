#include <gtest/gtest.h>

#include <fstream>

#include "insdet/dataset.hpp"
#include "support/fixtures.hpp"

namespace insdet {
namespace {

namespace fs = std::filesystem;

ErrorCode scan_error(const fs::path& root) {
  try {
    scan_dataset(root);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "scan unexpectedly succeeded";
  return ErrorCode::kInvalidArgument;
}

TEST(DatasetTest, TwoInstancesWithTwentyFourViews) {
  const auto root = fixtures::scratch_dir("ds_full");
  fixtures::write_dataset(root, 2, 24);
  const auto layout = scan_dataset(root);
  ASSERT_EQ(layout.instances.size(), 2u);
  EXPECT_EQ(layout.instances[0].id, 1);
  EXPECT_EQ(layout.instances[1].id, 2);
  EXPECT_EQ(layout.instances[0].views.size(), 24u);
  EXPECT_TRUE(layout.warnings.empty());
  EXPECT_EQ(layout.backgrounds.size(), 2u);
  EXPECT_EQ(layout.backgrounds[0].width, 160);

  const auto assets = load_assets(layout, 2);
  EXPECT_EQ(assets.size(), 48u);
  EXPECT_EQ(assets[25].instance_id, 2);
  EXPECT_EQ(assets[25].view_index, 1);
  EXPECT_EQ(load_backgrounds(layout)[1].image.channels, 3);
  fs::remove_all(root);
}

TEST(DatasetTest, MissingViewsWarnButKeepTheInstance) {
  const auto root = fixtures::scratch_dir("ds_short");
  fixtures::write_dataset(root, 2, 24);
  fs::remove(root / "objects" / "002_obj2" / "23.png");
  const auto layout = scan_dataset(root);
  ASSERT_EQ(layout.instances.size(), 2u);
  EXPECT_EQ(layout.instances[1].views.size(), 23u);
  ASSERT_EQ(layout.warnings.size(), 1u);
  EXPECT_NE(layout.warnings[0].find("23 views"), std::string::npos);
  fs::remove_all(root);
}

TEST(DatasetTest, ErrorCases) {
  EXPECT_EQ(scan_error("/nonexistent/insdet"), ErrorCode::kMissingPath);

  const auto root = fixtures::scratch_dir("ds_err");
  EXPECT_EQ(scan_error(root), ErrorCode::kMissingPath);

  fixtures::write_dataset(root, 2, 3);
  fs::create_directories(root / "objects" / "003_empty");
  EXPECT_EQ(scan_error(root), ErrorCode::kEmptyInput);
  fs::remove_all(root / "objects" / "003_empty");

  fs::create_directories(root / "objects" / "01_dup");
  fs::copy(root / "objects" / "001_obj1" / "00.png", root / "objects" / "01_dup" / "00.png");
  EXPECT_EQ(scan_error(root), ErrorCode::kDuplicateId);
  fs::remove_all(root / "objects" / "01_dup");

  std::ofstream(root / "objects" / "002_obj2" / "05.png") << "not a png";
  EXPECT_EQ(scan_error(root), ErrorCode::kDecode);
  fs::remove_all(root);
}

TEST(DatasetTest, LayoutOverrideAndSceneTags) {
  const auto root = fixtures::scratch_dir("ds_layout");
  fixtures::write_dataset(root, 1, 24);
  fs::rename(root / "objects", root / "profiles");
  fs::create_directories(root / "test");
  std::ofstream(root / "test" / "gt.json") << R"({"version": 1,
    "images": [{"id": 1, "file": "a.png", "width": 8, "height": 8, "scene_tag": "easy"},
               {"id": 2, "file": "b.png", "width": 8, "height": 8, "scene_tag": "hard"},
               {"id": 3, "file": "c.png", "width": 8, "height": 8, "scene_tag": "hard"}],
    "instances": [{"id": 1, "name": "obj1"}]})";
  std::ofstream(root / "layout.json") << R"({"objects": "profiles", "annotations": "test/gt.json"})";
  const auto layout = scan_dataset(root);
  EXPECT_EQ(layout.instances.size(), 1u);
  EXPECT_EQ(layout.num_scene_images, 3u);
  EXPECT_EQ(layout.num_easy, 1u);
  EXPECT_EQ(layout.num_hard, 2u);

  std::ofstream(root / "layout.json") << R"({"objectz": "profiles"})";
  EXPECT_EQ(scan_error(root), ErrorCode::kSchema);
  fs::remove_all(root);
}

TEST(DatasetTest, NonNumericNamesGetSequentialIds) {
  const auto root = fixtures::scratch_dir("ds_names");
  fixtures::write_dataset(root, 2, 2);
  fs::rename(root / "objects" / "001_obj1", root / "objects" / "mug");
  fs::rename(root / "objects" / "002_obj2", root / "objects" / "bowl");
  const auto layout = scan_dataset(root);
  EXPECT_EQ(layout.instances[0].name, "bowl");
  EXPECT_EQ(layout.instances[0].id, 1);
  EXPECT_EQ(layout.instances[1].id, 2);
  fs::remove_all(root);
}

}  // namespace
}  // namespace insdet
