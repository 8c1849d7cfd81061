"""
AAM CLI package: benchmark, algorithm-run and model-fit commands.
"""
