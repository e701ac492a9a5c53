#include <doctest.h>

#include <filesystem>

#include "pertl/serialization.hpp"

using namespace pertl;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pertl_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("key-value parsing") {
  const auto kv = parse_key_values("# comment\nheads = 4\n\n  lr0=1e-3   # trailing\nrange.x0 = -1, 1\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("heads") == "4");
  CHECK(kv.at("lr0") == "1e-3");
  CHECK(kv.at("range.x0") == "-1, 1");
  CHECK_THROWS_AS(parse_key_values("heads\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), std::invalid_argument);
}

TEST_CASE("training keys are applied and unknown keys reported") {
  TrainConfig c;
  const auto unknown = apply_train_keys(
      parse_key_values("heads = 4\nhidden_widths = 8, 8, 6\nh = 3\nrange.gamma = 1, 2\nmystery = 1\n"), c);
  CHECK(unknown == std::vector<std::string>{"mystery"});
  CHECK(c.heads == 4);
  CHECK(c.hidden_widths == std::vector<int>{8, 8, 6});
  CHECK(c.h == 3);
  CHECK(c.ranges.gamma == Interval{1.0, 2.0});
  CHECK_THROWS(apply_train_keys(parse_key_values("heads = four\n"), c));
  CHECK_THROWS(apply_train_keys(parse_key_values("range.x0 = 2, 1\n"), c));
}

TEST_CASE("training config text round-trips") {
  TrainConfig c;
  c.seed = 17;
  c.lr0 = 1.25e-4;
  c.ranges.alpha = {0.25, 1.5};
  TrainConfig d;
  CHECK(apply_train_keys(parse_key_values(train_config_to_text(c)), d).empty());
  CHECK(d == c);
}

TEST_CASE("number parsing") {
  CHECK(parse_double("k", " 2.5 ") == 2.5);
  CHECK_THROWS(parse_double("k", "2.5x"));
  CHECK_THROWS(parse_double("k", "nan"));
  CHECK(parse_int("k", "-3") == -3);
  CHECK_THROWS(parse_int("k", "1.5"));
  CHECK(parse_double_list("k", "1, 2,3") == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(parse_interval("k", "0.5, 3") == Interval{0.5, 3.0});
  CHECK_THROWS(parse_interval("k", "1"));
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  const double x = 1.0 / 3.0;
  CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("content hash") {
  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") == "af63dc4c8601ec8c");
  CHECK(content_hash("a") != content_hash("b"));
}

TEST_CASE("checkpoint round trip is exact") {
  Checkpoint ck;
  ck.config.heads = 2;
  ck.config.hidden_widths = {5, 6};
  ck.config.h = 3;
  ck.trunk = TrunkParams::init(ck.config.trunk_spec(), 9);
  ck.heads = init_heads(ck.config.trunk_spec(), 2, 9);
  ck.parameter_sets = sample_parameter_sets(ck.config);
  ck.final_head_losses = {1e-5, 3.14159e-6};
  ck.final_total_loss = 1.314159e-5;
  const auto text = checkpoint_to_text(ck);
  CHECK(text.find(kCheckpointFormat) != std::string::npos);
  const auto back = checkpoint_from_text(text);
  CHECK(back.config == ck.config);
  CHECK(back.trunk.spec == ck.trunk.spec);
  for (std::size_t l = 0; l < ck.trunk.weights.size(); ++l) {
    CHECK(back.trunk.weights[l] == ck.trunk.weights[l]);
    CHECK(back.trunk.biases[l] == ck.trunk.biases[l]);
  }
  CHECK(back.heads[1] == ck.heads[1]);
  CHECK(back.parameter_sets == ck.parameter_sets);
  CHECK(back.final_head_losses == ck.final_head_losses);
  CHECK(checkpoint_to_text(back) == text);

  const auto dir = temp_dir("ckpt");
  save_checkpoint(ck, dir / "nested" / "c.json");
  CHECK(checkpoint_to_text(load_checkpoint(dir / "nested" / "c.json")) == text);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed checkpoints are rejected") {
  CHECK_THROWS(checkpoint_from_text("not json"));
  CHECK_THROWS(checkpoint_from_text("{\"format\": \"something-else\"}"));
  CHECK_THROWS(load_checkpoint("/nonexistent/pertl/checkpoint.json"));
}

TEST_CASE("CSV parse and emit") {
  const std::string text = "# provenance\na,b\n1,2\n3,4\n";
  const auto t = parse_csv(text);
  CHECK(t.comments == std::vector<std::string>{"provenance"});
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows.size() == 2);
  CHECK(t.column("b") == 1);
  CHECK_THROWS(t.column("c"));
  CHECK(csv_to_text(t) == text);
  CHECK_THROWS(parse_csv("a,b\n1\n"));
  CHECK_THROWS(parse_csv("# only a comment\n"));
}
