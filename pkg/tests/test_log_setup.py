import logging

from data_processor import DataProcessor
from log_setup import setup_logging
from training import DenoiserTrainer, PgeTrainer


def test_setup_creates_log_directory(tmp_path):
    setup_logging(str(tmp_path / 'nested' / 'logs' / 'run.log'))
    assert (tmp_path / 'nested' / 'logs').is_dir()


def test_entry_classes_share_setup(tmp_path):
    for k, cls in enumerate([DataProcessor, PgeTrainer, DenoiserTrainer]):
        log_file = tmp_path / f"logs_{k}" / 'run.log'
        instance = cls(log_file=str(log_file))
        assert log_file.parent.is_dir()
        assert isinstance(instance.logger, logging.Logger)
