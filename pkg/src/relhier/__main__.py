from .cli_runner import main_entry

main_entry()
