#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(STRIDELAB_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::size_t count_lines_not_starting_with(const std::string& text, char c) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const auto line = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    if (!line.empty() && line[0] != c) ++n;
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return n;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / ("stridelab_cli_" + name);
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST_CASE("enumerate") {
  auto r = run("enumerate --class time-priority --endpoint 2,16");
  CHECK(r.code == 0);
  CHECK(count_lines_not_starting_with(r.out, '#') == 25);
  CHECK(r.out.find("T14c") != std::string::npos);

  r = run("enumerate --endpoint 1,1");
  CHECK(r.code == 0);
  CHECK(count_lines_not_starting_with(r.out, '#') == 1);
  CHECK(r.out.find("extension name") != std::string::npos);

  r = run("enumerate");
  CHECK(r.code == 0);
  CHECK(count_lines_not_starting_with(r.out, '#') == 1024);

  r = run("enumerate --published");
  CHECK(count_lines_not_starting_with(r.out, '#') == 24);

  r = run("enumerate --dot");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("digraph", 0) == 0);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run("enumerate --class sideways").code == 1);
  CHECK(run("enumerate --endpoint 3,4").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("analyze resnet 34 --path NOPE").code == 1);
  CHECK(run("analyze resnet 34 --path 1,1,3,1,1/1,1,1,1,1").code == 1);
}

TEST_CASE("analyze and compare") {
  auto r = run("analyze resnet 34 --gemini");
  CHECK(r.code == 0);
  CHECK(r.out.find("params  5.98 M") != std::string::npos);
  CHECK(r.out.find("4.36 / 6.53 G") != std::string::npos);

  r = run("analyze resnet 34 --path MOD --compare T14c");
  CHECK(r.code == 0);
  CHECK(r.out.find("params -9.88%") != std::string::npos);

  r = run("analyze dfresnet 183 --path T14c --csv");
  CHECK(r.code == 0);
  CHECK(r.out.find("2,16,9.20,") != std::string::npos);

  r = run("analyze resnet 34 --layers");
  CHECK(r.code == 0);
  CHECK(r.out.find("head.fc") != std::string::npos);

  CHECK(run("analyze resnet 35").code == 2);
  CHECK(run("analyze dfresnet 34").code == 2);

  r = run("compare MOD T14c --frames 300");
  CHECK(r.code == 0);
  CHECK(r.out.find("delta") != std::string::npos);
}

TEST_CASE("build, verify and reject corrupted specs") {
  const auto spec = std::filesystem::temp_directory_path() / "stridelab_cli_spec.json";
  auto r = run("build gemini 34 --path T23c -o " + spec.string());
  CHECK(r.code == 0);
  r = run("verify --spec " + spec.string() + " --frames 64");
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("\"failures\": 0") != std::string::npos);

  std::ifstream in(spec);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto bad = std::regex_replace(text, std::regex(R"("time": 2)"), R"("time": 3)",
                                      std::regex_constants::format_first_only);
  REQUIRE(bad != text);
  const auto bad_path = temp_file("bad.json", bad);
  CHECK(run("verify --spec " + bad_path.string()).code == 2);
  CHECK(run("compare " + spec.string() + " " + bad_path.string()).code == 2);
  CHECK(run("compare " + spec.string() + " MOD").code == 0);
}

TEST_CASE("gradcheck") {
  const auto r = run("verify --gradcheck --layers 8");
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS gradcheck layers=8") != std::string::npos);
}

TEST_CASE("metrics") {
  const auto good = temp_file("good.txt", "target 0.9\ntarget 0.8\nnontarget 0.1\nnontarget 0.2\n");
  auto r = run("metrics " + good.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("EER 0.000%") != std::string::npos);

  const auto broken = temp_file("broken.txt", "target 0.9\nnontarget zero\n");
  r = run("metrics " + broken.string());
  CHECK(r.code == 2);
  CHECK(r.out.find("line 2") != std::string::npos);

  CHECK(run("metrics /nonexistent/scores.txt").code == 2);
  CHECK(run("metrics " + good.string() + " --p-target 1.5").code != 0);
}

TEST_CASE("render") {
  auto r = run("render --csv");
  CHECK(r.code == 0);
  CHECK(count_lines_not_starting_with(r.out, '#') == 25);
  CHECK(r.out.rfind("index,time_strides", 0) == 0);

  r = run("render --endpoint 2,16 --path T14c");
  CHECK(r.code == 0);
  CHECK(r.out.find("penwidth=3") != std::string::npos);
}
