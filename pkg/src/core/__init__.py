"""
核心模块
包含检索流水线、后端基类与注册表、批量运行器和异常定义
"""
