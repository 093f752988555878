import sys

from cx_Freeze import setup, Executable

# cx_Freeze 的模块扫描在深层依赖图上会超出默认递归深度
sys.setrecursionlimit(10000)

# 包含的文件和目录
include_files = [
    ("config.json", "config.json"),
    ("fixtures/", "fixtures/"),
    ("configs/", "configs/"),
    ("src/", "src/"),
]

# 构建选项
build_options = {
    "packages": ["click", "networkx", "numpy", "pandas", "tqdm"],
    "include_files": include_files,
    "excludes": ["tkinter", "matplotlib", "tensorflow", "torch", "torchvision", "safetensors"],  # 排除不需要的包
    "optimize": 2,  # 优化级别
}

# 可执行文件配置（命令行程序，保留控制台）
executables = [
    Executable(
        "main.py",
        base=None,
        target_name="tempest-lab",
        icon=None,
    )
]

setup(
    name="Tempest Lab",
    version="0.1.0",
    description="时间维度去匿名化攻击模拟实验室",
    options={"build_exe": build_options},
    executables=executables,
)
