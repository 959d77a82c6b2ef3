#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

// Shared helpers for tests that need files on disk.  Everything lives under
// ./scratch relative to the test working directory (the build tree).

inline std::string scratch_dir(const std::string& name) {
    namespace fs = std::filesystem;
    fs::path p = fs::path("scratch") / name;
    fs::create_directories(p);
    return p.string();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}
