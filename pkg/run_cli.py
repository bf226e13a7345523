#!/usr/bin/env python3
"""LoRa_EnergyKits 命令行启动入口

使用方法：
    python run_cli.py airtime --sf 7 --payload 12
    python run_cli.py table1
    python run_cli.py simulate --scenario configs/scenarios/reference_poll.json
    python run_cli.py compare --scenario configs/scenarios/reference_poll.json \
        --scenario configs/scenarios/reference_sleepy.json
"""

import sys
from pathlib import Path

# 添加 src 到 Python 路径
sys.path.insert(0, str(Path(__file__).parent / "src"))

from cli.main import main


if __name__ == "__main__":
    sys.exit(main())
