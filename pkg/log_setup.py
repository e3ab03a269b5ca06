import logging
import os

from config import LOGGING_CONFIG


def setup_logging(log_file: str = LOGGING_CONFIG['file']):
    """File plus console handlers on the root logger; later calls keep the first configuration"""
    os.makedirs(os.path.dirname(log_file) or '.', exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, LOGGING_CONFIG['level']),
        format=LOGGING_CONFIG['format'],
        handlers=[
            logging.FileHandler(log_file, encoding='utf-8'),
            logging.StreamHandler()
        ]
    )
