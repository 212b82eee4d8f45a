import logging
import sys

from dotenv import load_dotenv

from config.settings import get_settings
from lab.app.controllers.cli_controller import main as cli_main


def main() -> int:
    load_dotenv()
    settings = get_settings()
    logging.getLogger().setLevel(settings.LOG_LEVEL.upper())
    return cli_main(sys.argv[1:], settings=settings)


if __name__ == "__main__":
    logging.basicConfig(
        level=logging.INFO,
        stream=sys.stdout,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logging.info("Run interrupted manually")
        sys.exit(1)
    except SystemExit:
        raise
    except Exception as e_global:
        logging.critical(f"Global unhandled exception in main: {e_global}",
                         exc_info=True)
        sys.exit(1)
