#include <doctest.h>

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "cubekit/error.hpp"
#include "cubekit/extraction.hpp"
#include "cubekit/parallel.hpp"
#include "cubekit/pipeline.hpp"
#include "paths.hpp"

// After Eigen: resolv.h defines a _res macro that clashes with Eigen internals.
#include <httplib.h>

using namespace cubekit;

namespace {

std::shared_ptr<Transport> canned() { return make_transport("dir:" + fixture("canned_clients").string()); }

std::string fake_cmd() { return "cmd:python3 " + fixture("fake_client.py").string(); }

class FlakyTransport : public Transport {
 public:
  explicit FlakyTransport(int failures) : left_(failures) {}
  Json call(const Json& req) override {
    if (left_-- > 0) throw TransportError("temporary");
    return {{"echo", req}};
  }
  std::atomic<int> left_;
};

ArtifactRecord rec(std::string id, std::string label, std::string country) {
  ArtifactRecord r;
  r.node_id = std::move(id);
  r.label = std::move(label);
  r.country = std::move(country);
  r.continent = CountryTable::instance().at(r.country).continent;
  r.hop = 1;
  return r;
}

// Scripted refinement client; "boom" labels fail.
struct ScriptedRefiner : RefinementClient {
  bool judge(const ArtifactRecord& r) override {
    if (r.label == "boom") throw TransportError("judge down");
    return r.label != "drop";
  }
  std::vector<std::string> complete(Concept, const std::string& country) override {
    if (country == "JP") return {"Tempura", "SUSHI"};
    return {};
  }
};

}  // namespace

TEST_CASE("request keys are stable and order-independent") {
  Json a = {{"op", "x"}, {"b", 1}};
  Json b = {{"b", 1}, {"op", "x"}};
  CHECK(request_key(a) == request_key(b));
  CHECK(request_key(a).size() == 16);
}

TEST_CASE("canned transport") {
  auto t = canned();
  const auto res = t->call({{"op", "concept_check"}, {"image", "t1-s2"}, {"concept", "Cuisine"}});
  CHECK(res["verdict"] == false);
  CHECK_THROWS_AS(t->call({{"op", "unknown"}}), TransportError);
  CHECK_THROWS_AS(make_transport("dir:/nonexistent/dir"), InputError);
  CHECK_THROWS_AS(make_transport("ftp://x"), InputError);
}

TEST_CASE("stdio transport") {
  auto t = make_transport(fake_cmd());
  const auto res = t->call({{"op", "popularity"}, {"label", "pizza"}, {"gl", "it"}});
  CHECK(res["count"] == 5000);
  auto broken = make_transport("cmd:exit 3", 1);
  CHECK_THROWS_AS(broken->call({{"op", "x"}}), TransportError);
  auto garbage = make_transport("cmd:echo not-json", 1);
  CHECK_THROWS_AS(garbage->call({{"op", "x"}}), TransportError);
}

TEST_CASE("retries") {
  auto flaky = std::make_shared<FlakyTransport>(2);
  RetryingTransport ok(flaky, 3);
  CHECK(ok.call({{"a", 1}})["echo"]["a"] == 1);
  auto flakier = std::make_shared<FlakyTransport>(5);
  RetryingTransport fail(flakier, 3);
  CHECK_THROWS_AS(fail.call({{"a", 1}}), TransportError);
}

TEST_CASE("bounded parallel for reports the lowest failing index") {
  std::atomic<int> calls{0};
  try {
    bounded_parallel_for(100, 8, [&](std::size_t i) {
      ++calls;
      if (i == 17 || i == 60) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "fail 17");
  }
  CHECK(calls == 100);
}

TEST_CASE("refinement drops, completes and dedupes") {
  ScriptedRefiner client;
  std::vector<ArtifactRecord> in{rec("Q1", "sushi", "JP"), rec("Q2", "drop", "JP"),
                                 rec("Q3", "pizza", "IT")};
  const auto out = refine_with_llm(in, Concept::Cuisine, client, 3);
  REQUIRE(out.size() == 3);
  CHECK(out[0].node_id == "Q1");
  CHECK(out[1].node_id == "Q3");
  CHECK(out[2].label == "Tempura");
  CHECK(out[2].provenance == Provenance::LLMCompletion);
  CHECK_FALSE(out[2].hop);
  CHECK(out[2].node_id.rfind("GEN-", 0) == 0);

  in.push_back(rec("Q4", "boom", "FR"));
  try {
    refine_with_llm(in, Concept::Cuisine, client, 2);
    FAIL("expected RefinementFailure");
  } catch (const RefinementFailure& e) {
    CHECK(e.offset() == 3);
  }
}

TEST_CASE("popularity ranking over canned responses") {
  JsonPopularityClient client(canned());
  std::vector<ArtifactRecord> in{rec("Q271555", "Biriyani", "IN"), rec("Q177", "pizza", "IT"),
                                 rec("Q999", "unheard", "IT")};
  const auto r = rank_by_popularity(in, client, 2);
  CHECK(r.failures == 1);
  REQUIRE(r.ranked.size() == 3);
  CHECK(r.ranked[0].artifact.node_id == "Q177");
  CHECK(r.ranked[1].artifact.node_id == "Q271555");
  CHECK(r.ranked[2].score == -1);
}

TEST_CASE("image mapping stages") {
  JsonMapperClient mapper(canned());
  JsonRetrieverClient retriever(canned());
  std::vector<ImageRef> imgs{{"t0-s6", 0, 6}, {"t1-s2", 1, 2}, {"t1-s4", 1, 4}, {"t1-s7", 1, 7}};
  const auto out = map_images(imgs, Concept::Cuisine, mapper, retriever, 4);
  REQUIRE(out.size() == 4);
  const auto& m = std::get<MappedItem>(out[0]);
  CHECK(m.artifact_id == "Q5449200");
  CHECK(m.country == "IT");
  CHECK(m.continent == Continent::Europe);
  CHECK(std::get<Unmappable>(out[1]).stage == MapStage::Concept);
  CHECK(std::get<Unmappable>(out[2]).stage == MapStage::Country);
  CHECK(std::get<Unmappable>(out[3]).stage == MapStage::Retrieval);
}

TEST_CASE("within-culture filter") {
  auto t = make_transport(fake_cmd());
  JsonMapperClient vqa(t);
  std::vector<MappedItem> items(3);
  items[0].image_id = "t0-s1";  // JP
  items[1].image_id = "t0-s3";  // IT
  items[2].image_id = "t1-s0";  // JP
  const auto r = within_culture_filter(items, Concept::Cuisine, "JP", vqa, 2);
  CHECK(r.removed == 1);
  REQUIRE(r.kept.size() == 2);
  CHECK(r.kept[1].image_id == "t1-s0");
}

TEST_CASE("http transport") {
  httplib::Server svr;
  svr.Post("/judge", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = Json::parse(req.body);
    res.set_content(Json({{"keep", body["record"]["label"] == "sushi"}}).dump(), "application/json");
  });
  svr.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const int port = svr.bind_to_any_port("127.0.0.1");
  std::thread server([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();

  const auto base = "http://127.0.0.1:" + std::to_string(port);
  JsonRefinementClient client(make_transport(base + "/judge"));
  CHECK(client.judge(rec("Q1", "sushi", "JP")));
  CHECK_FALSE(client.judge(rec("Q2", "pizza", "IT")));
  auto down = make_transport(base + "/down", 2);
  CHECK_THROWS_AS(down->call({{"op", "x"}}), TransportError);

  svr.stop();
  server.join();
}
