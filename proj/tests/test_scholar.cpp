#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "support.hpp"

#include "hypogen/scholar.hpp"

using namespace hypogen::scholar;

namespace {

struct MockScholar {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> hits{0};
    std::vector<std::chrono::steady_clock::time_point> arrivals;
    std::mutex arrivals_mutex;
    int papers_to_return = 10;

    MockScholar() {
        server.Get("/graph/v1/paper/search",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       ++hits;
                       {
                           std::lock_guard<std::mutex> lock(arrivals_mutex);
                           arrivals.push_back(std::chrono::steady_clock::now());
                       }
                       CHECK(req.has_param("query"));
                       CHECK(req.get_param_value("fields") == "title,abstract,year,externalIds");
                       nlohmann::json data = nlohmann::json::array();
                       for (int i = 0; i < papers_to_return; ++i) {
                           data.push_back({{"title", "Paper " + std::to_string(i)},
                                           {"abstract", std::string(900, 'a')},
                                           {"year", 2000 + i},
                                           {"externalIds", {{"DOI", "10.1/" + std::to_string(i)}}}});
                       }
                       res.set_content(nlohmann::json{{"total", papers_to_return}, {"data", data}}.dump(),
                                       "application/json");
                   });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    ~MockScholar() {
        server.stop();
        thread.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("build_query strips id tokens and parentheticals") {
    CHECK(build_query(std::string_view("Short statement with no ids.")) ==
          "Short statement with no ids.");
    CHECK(build_query(std::string_view(
              "The co-occurrence of fluoranthene and pyrene (IDs 12,13) specifically in "
              "Antarctic meteorites.")) ==
          "The co-occurrence of fluoranthene and pyrene specifically in Antarctic meteorites.");
    CHECK(build_query(std::string_view("Compounds IDs 2, 8, 15 look meteoritic.")) ==
          "Compounds look meteoritic.");
}

TEST_CASE("build_query truncates at a word boundary") {
    std::string word = "hydrocarbon ";
    std::string statement;
    while (statement.size() < 400) statement += word;
    std::string q = build_query(std::string_view(statement));
    CHECK(q.size() <= 300);
    CHECK(q.size() >= 280);
    CHECK(q.back() != ' ');
    CHECK(statement.substr(0, q.size()) == q);
}

TEST_CASE("limit requests above five are clamped") {
    MockScholar mock;
    testsupport::TempDir tmp;
    ScholarOptions opts;
    opts.endpoint = mock.endpoint();
    opts.cache_dir = (tmp.path / "cache").string();
    opts.min_request_interval = std::chrono::milliseconds(0);
    ScholarClient client(opts);
    auto result = client.search("extraterrestrial PAH formation", 10);
    CHECK(result.snippets.size() == 5);
    CHECK(!result.from_cache);
    CHECK(result.snippets[0].abstract_excerpt.size() == 600);
    CHECK(result.snippets[0].external_id == "10.1/0");
}

TEST_CASE("zero matches yields an empty result, not an error") {
    MockScholar mock;
    mock.papers_to_return = 0;
    testsupport::TempDir tmp;
    ScholarOptions opts;
    opts.endpoint = mock.endpoint();
    opts.cache_dir = (tmp.path / "cache").string();
    opts.min_request_interval = std::chrono::milliseconds(0);
    ScholarClient client(opts);
    auto result = client.search("query with no matches", 5);
    CHECK(result.snippets.empty());
}

TEST_CASE("repeated identical query is served from the cache") {
    MockScholar mock;
    testsupport::TempDir tmp;
    ScholarOptions opts;
    opts.endpoint = mock.endpoint();
    opts.cache_dir = (tmp.path / "cache").string();
    opts.min_request_interval = std::chrono::milliseconds(0);
    ScholarClient client(opts);

    auto first = client.search("sulfur incorporation in chondrites", 3);
    auto second = client.search("sulfur incorporation in chondrites", 3);
    CHECK(mock.hits == 1);
    CHECK(!first.from_cache);
    CHECK(second.from_cache);
    REQUIRE(first.snippets.size() == second.snippets.size());
    for (size_t i = 0; i < first.snippets.size(); ++i) {
        CHECK(first.snippets[i].title == second.snippets[i].title);
        CHECK(first.snippets[i].abstract_excerpt == second.snippets[i].abstract_excerpt);
        CHECK(first.snippets[i].year == second.snippets[i].year);
        CHECK(first.snippets[i].external_id == second.snippets[i].external_id);
    }
    // The persisted fetch timestamp survives the round-trip.
    CHECK(second.fetched_at == first.fetched_at);
}

TEST_CASE("distinct limits are distinct cache entries") {
    MockScholar mock;
    testsupport::TempDir tmp;
    ScholarOptions opts;
    opts.endpoint = mock.endpoint();
    opts.cache_dir = (tmp.path / "cache").string();
    opts.min_request_interval = std::chrono::milliseconds(0);
    ScholarClient client(opts);
    client.search("same query", 2);
    client.search("same query", 3);
    CHECK(mock.hits == 2);
}

TEST_CASE("rate limiter spaces outbound requests") {
    MockScholar mock;
    testsupport::TempDir tmp;
    ScholarOptions opts;
    opts.endpoint = mock.endpoint();
    opts.cache_dir = (tmp.path / "cache").string();
    opts.min_request_interval = std::chrono::milliseconds(40);
    ScholarClient client(opts);
    client.search("query one", 2);
    client.search("query two", 2);
    client.search("query three", 2);
    REQUIRE(mock.arrivals.size() == 3);
    for (size_t i = 1; i < mock.arrivals.size(); ++i) {
        auto gap = std::chrono::duration_cast<std::chrono::milliseconds>(mock.arrivals[i] -
                                                                         mock.arrivals[i - 1]);
        CHECK(gap.count() >= 30);  // margin below the configured 40ms
    }
}

TEST_CASE("offline mode misses return empty results and never touch the network") {
    testsupport::TempDir tmp;
    ScholarOptions opts;
    opts.mode = "offline";
    opts.endpoint = "http://127.0.0.1:1";  // would fail if contacted
    opts.cache_dir = (tmp.path / "cache").string();
    ScholarClient client(opts);
    auto result = client.search("anything at all", 5);
    CHECK(result.snippets.empty());
    CHECK(!result.from_cache);
}

TEST_CASE("offline mode still serves cache hits") {
    testsupport::TempDir tmp;
    ScholarOptions opts;
    opts.cache_dir = (tmp.path / "cache").string();
    opts.min_request_interval = std::chrono::milliseconds(0);
    {
        MockScholar mock;
        opts.endpoint = mock.endpoint();
        ScholarClient online(opts);
        online.search("recorded query", 4);
    }
    opts.mode = "offline";
    ScholarClient replay(opts);
    auto result = replay.search("recorded query", 4);
    CHECK(result.from_cache);
    CHECK(result.snippets.size() == 4);
}

TEST_CASE("sha256 hash matches a known vector") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
