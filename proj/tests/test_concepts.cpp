#include "synood/concepts.hpp"
#include "synood/errors.hpp"
#include "synood/mock_backends.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <atomic>
#include <fstream>

using namespace synood;
namespace fs = std::filesystem;

namespace {

class ScriptedConcepts final : public ConceptBackend {
 public:
  explicit ScriptedConcepts(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  ConceptResponse concepts(const ConceptRequest& req) override {
    ++calls;
    last_prompt = req.prompt;
    return {{replies_.at(std::min<std::size_t>(req.attempt, replies_.size() - 1))}};
  }
  std::atomic<int> calls{0};
  std::string last_prompt;

 private:
  std::vector<std::string> replies_;
};

}  // namespace

TEST_SUITE("concepts") {
  TEST_CASE("normalization") {
    CHECK(normalize_concept("  Teddy   Bears ") == "teddy bear");
    CHECK(normalize_concept("glass") == "glass");
    CHECK(normalize_concept("Kites") == "kite");
    CHECK(normalize_concept("") == "");
    for (const char* s : {"Scarecrows", " a  b ", "Bus"}) {
      CHECK(normalize_concept(normalize_concept(s)) == normalize_concept(s));
    }
  }

  TEST_CASE("parsing replies") {
    CHECK(parse_concepts("`mannequin', `sculpture', \"doll\" ,puppet") ==
          std::vector<std::string>{"mannequin", "sculpture", "doll", "puppet"});
    CHECK_THROWS_AS(parse_concepts(" , `' ,"), EmptyResponseError);
    const std::vector<std::string> xs{"a b", "c"};
    CHECK(parse_concepts(render_concepts(xs)) == xs);
  }

  TEST_CASE("prompt lists the vocabulary and ends with the query") {
    const Vocabulary v({"person", "car"});
    const auto p = build_prompt(v, "car");
    CHECK(p.find("[`person', `car']") != std::string::npos);
    CHECK(p.substr(p.size() - 4) == " car");
    CHECK_THROWS_AS(build_prompt(v, "dog"), ArgumentError);
  }

  TEST_CASE("sanitizing drops labels, forbidden terms and duplicates") {
    const Vocabulary v({"person", "car"});
    ConceptConfig cfg;
    cfg.concepts_per_label = 3;
    cfg.forbidden_terms = {"giraffe"};
    const std::vector<std::string> in{"Persons", "doll", "Giraffes", "DOLL", "robot", "statue", "kite"};
    CHECK(sanitize_concepts(in, v, cfg) == std::vector<std::string>{"doll", "robot", "statue"});
  }

  TEST_CASE("sanitizing examples") {
    ConceptConfig cfg;
    cfg.forbidden_terms = {"umbrella"};
    const Vocabulary person({"person"});
    CHECK(sanitize_concepts(std::vector<std::string>{"mannequin", "person", "umbrella"}, person, cfg) ==
          std::vector<std::string>{"mannequin"});
    CHECK(sanitize_concepts(std::vector<std::string>{"Dolls", "doll"}, person, cfg) ==
          std::vector<std::string>{"Dolls"});
  }

  TEST_CASE("imagination retries until each label is full") {
    const Vocabulary v({"person"});
    ScriptedConcepts backend({"doll, person", "doll, robot", "statue, puppet"});
    ConceptConfig cfg;
    cfg.concepts_per_label = 3;
    const auto map = imagine_concepts(backend, v, cfg);
    CHECK(map.per_label[0] == std::vector<std::string>{"doll", "robot", "statue"});
    CHECK(backend.calls == 3);
    CHECK(backend.last_prompt == build_prompt(v, "person"));
  }

  TEST_CASE("a label that never fills is reported") {
    const Vocabulary v({"person", "car"});
    ScriptedConcepts backend({"person"});
    ConceptConfig cfg;
    cfg.retry_budget = 2;
    try {
      imagine_concepts(backend, v, cfg);
      FAIL("expected partial result");
    } catch (const PartialResultError& e) {
      CHECK(e.short_labels() == std::vector<std::string>{"person", "car"});
    }
    CHECK(backend.calls == 4);
  }

  TEST_CASE("mock imagination is deterministic and never returns forbidden terms") {
    const Vocabulary v({"person", "car", "dog", "bicycle", "bottle"});
    ConceptConfig cfg;
    cfg.forbidden_terms = {"giraffe", "kite"};
    MockConceptBackend a(MockWorld::with_defaults(1)), b(MockWorld::with_defaults(1));
    cfg.concurrency = 1;
    const auto m1 = imagine_concepts(a, v, cfg);
    cfg.concurrency = 5;
    const auto m2 = imagine_concepts(b, v, cfg);
    CHECK(m1 == m2);
    for (const auto& list : m1.per_label) {
      CHECK(list.size() == 5);
      for (const auto& c : list) {
        CHECK_FALSE(cfg.forbidden_terms.count(normalize_concept(c)));
        CHECK_FALSE(v.find(normalize_concept(c)));
      }
    }
  }

  TEST_CASE("the shipped blocklist is normalized") {
    const auto terms = load_forbidden_terms(fs::path(SYNOOD_SOURCE_DIR) / "config" / "forbidden_terms.txt");
    CHECK(terms.count("giraffe"));
    CHECK(terms.count("teddy bear"));
    ConceptConfig cfg;
    cfg.forbidden_terms = terms;
    CHECK_NOTHROW(cfg.validate());
  }

  TEST_CASE("forbidden term files") {
    testing::TempDir dir;
    std::ofstream(dir / "f.txt") << "# comment\nGiraffes\n\n  teddy   bear # trailing\n";
    CHECK(load_forbidden_terms(dir / "f.txt") == std::set<std::string>{"giraffe", "teddy bear"});
  }
}
