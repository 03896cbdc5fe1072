#include <catch_amalgamated.hpp>

#include <sstream>

#include "test_support.hpp"

using namespace lsem;

TEST_CASE("graph JSON round trip", "[io]") {
  Rng rng(1);
  const MixedGraph g = layered_graph(12, 3, 0.4, rng);
  const Json j = graph_to_json(g);
  CHECK(j["n"] == 12);
  CHECK(graph_from_json(Json::parse(j.dump())) == g);
  CHECK(graph_to_json(path_graph(3)).dump() == R"({"n":3,"directed":[[0,1],[1,2]],"bidirected":[[0,2]]})");
}

TEST_CASE("graph JSON errors", "[io]") {
  for (const char* text : {R"({"directed":[]})", R"({"n":3,"directed":[[0]]})", R"({"n":"x"})"}) {
    try {
      graph_from_json(Json::parse(text));
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }
  CHECK_THROWS_AS(graph_from_json(Json::parse(R"({"n":2,"directed":[[0,5]]})")), Error);
}

TEST_CASE("parameters JSON round trip keeps every bit", "[io]") {
  Rng rng(2);
  const Parameters p = random_parameters(path_graph(6), {0.5, 20}, rng);
  const Parameters q = parameters_from_json(Json::parse(parameters_to_json(p).dump()));
  CHECK(q.graph == p.graph);
  CHECK(q.lambda == p.lambda);
  CHECK(q.omega == p.omega);
  REQUIRE(q.gram_vectors.has_value());
  CHECK(*q.gram_vectors == *p.gram_vectors);
  CHECK_FALSE(parameters_from_json(parameters_to_json(instability_instance(0.1))).gram_vectors.has_value());
}

TEST_CASE("recovery and report JSON layout", "[io]") {
  const RecoveryResult r = recover_path_lambda(test::displayed_sigma(0.1), 4);
  const Json j = recovery_to_json(r);
  CHECK(j["omega"].is_null());
  CHECK(j["min_pivots"][0].is_null());
  CHECK(j["lambda"].size() == 4);

  const ConditionReport rep = summarize_kappas(3, {1.0, 2.0}, 1);
  const Json c = condition_report_to_json(rep);
  CHECK(c["trials"] == 3);
  CHECK(c["failed"] == 1);
  CHECK(c["mean_kappa"] == 1.5);
  CHECK(c["histogram"]["edges"].size() == 31);

  const ConditionReport none = summarize_kappas(2, {}, 2);
  CHECK(condition_report_to_json(none)["mean_kappa"].is_null());
}

TEST_CASE("data CSV ingestion", "[io]") {
  std::istringstream in("a,b,c\r\n1,2,3\r\n\r\n4.5,-1e-3, 7\n");
  const DataTable t = read_data_csv(in);
  CHECK(t.names == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.values == Matrix{{1, 2, 3}, {4.5, -1e-3, 7}});
  std::ostringstream out;
  write_data_csv(out, t);
  std::istringstream back(out.str());
  CHECK(read_data_csv(back).values == t.values);

  std::istringstream ragged("a,b\n1,2\n3\n");
  try {
    read_data_csv(ragged);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  std::istringstream empty("");
  CHECK_THROWS_AS(read_data_csv(empty), Error);
}

TEST_CASE("missing files report their path", "[io]") {
  try {
    read_json_file("/nonexistent/graph.json");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
    CHECK(std::string(e.what()).find("/nonexistent/graph.json") != std::string::npos);
  }
}
