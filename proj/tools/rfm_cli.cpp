#include <cstdio>

int main() {
  std::puts("rfm: command-line interface not wired up yet");
  return 1;
}
