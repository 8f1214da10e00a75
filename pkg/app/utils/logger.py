import logging
import os

# Директория для логов задаётся переменной окружения, по умолчанию ./logs
LOG_DIR = os.getenv("QCF_LOG_DIR", "./logs")
LOG_FILE_NAME = "qcf.log"

# Создаем директорию для логов, если она не существует
os.makedirs(LOG_DIR, exist_ok=True)

# Глобальная переменная для отслеживания инициализации логгера
logger = None


def setup_logger():
    """
    Настройка логгера с предотвращением дублирования обработчиков
    """
    global logger

    # Если логгер уже настроен, просто возвращаем его
    if logger is not None:
        return logger

    # Создаем или получаем существующий логгер
    logger = logging.getLogger("qcircle_forge")
    level_name = os.getenv("QCF_LOG_LEVEL", "INFO").upper()
    logger.setLevel(getattr(logging, level_name, logging.INFO))

    # Проверяем, есть ли уже обработчики
    if not logger.handlers:
        log_file = os.path.join(LOG_DIR, LOG_FILE_NAME)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")

        # Формат сообщения
        formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")
        file_handler.setFormatter(formatter)

        logger.addHandler(file_handler)

    return logger


# Инициализация логгера при импорте модуля
logger = setup_logger()


def log_info(message):
    """Записать информационное сообщение в лог"""
    logger.info(message)


def log_warning(message):
    """Записать warning сообщение в лог"""
    logger.warning(message)


def log_error(message):
    """Записать сообщение об ошибке в лог"""
    logger.error(message)


def log_debug(message):
    """Записать отладочное сообщение в лог"""
    logger.debug(message)


def log_stage(stage, **fields):
    """
    Структурная запись об этапе построения.

    Args:
        stage: Название этапа (например, "split.scaffold")
        **fields: Пары ключ-значение, записываются в порядке сортировки ключей
    """
    parts = [f"stage={stage}"]
    for key in sorted(fields):
        value = fields[key]
        if isinstance(value, float):
            value = f"{value:.6g}"
        parts.append(f"{key}={value}")
    logger.info(" ".join(parts))


def log_artifact_saved(path, size):
    """Логирование сохранения артефакта"""
    logger.info(f"Artifact saved: {path}, Size: {size} bytes")
