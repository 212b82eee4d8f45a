# Benchmark utilities package
